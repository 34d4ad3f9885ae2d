import init, { Scene, dotted_tunnel_sweep } from "./pkg/fittsview_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);
const status = (msg) => { $("status").textContent = msg; };

let scene = null;
let labels = null;

function loadScene() {
  scene = new Scene($("scene").value, 0n);
  labels = scene.labels();
  applyView();
}

function applyView() {
  const v = $("view");
  try {
    scene.set_view(v.width, v.height, num("radius"), num("weight"));
    status("");
  } catch (e) {
    status(e.message);
    return;
  }
  $("best").textContent = "";
  clearCanvas($("landscape"));
  draw();
}

function clearCanvas(c) {
  c.getContext("2d").clearRect(0, 0, c.width, c.height);
}

function draw() {
  const alpha = num("alpha");
  const beta = num("beta");
  const c = $("view");
  const ctx = c.getContext("2d");
  const xy = scene.project(alpha, beta);
  const r = num("radius");
  clearCanvas(c);
  // negatives first so the target stays on top
  for (const pass of [2, 1]) {
    ctx.fillStyle = pass === 1 ? "#e67e22" : "#7f8c8d";
    for (let i = 0; i < labels.length; i++) {
      if (labels[i] !== pass) continue;
      const x = xy[2 * i];
      const y = xy[2 * i + 1];
      if (Number.isNaN(x)) continue;
      ctx.beginPath();
      ctx.arc(x, y, r, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
  const s = scene.score(alpha, beta);
  $("difficulty").textContent = Number.isNaN(s.difficulty)
    ? `infeasible (${s.reason})`
    : s.difficulty.toFixed(3);
  s.free();
}

function sweep() {
  status("sweeping...");
  // let the status paint before the blocking sweep
  setTimeout(() => {
    const t0 = performance.now();
    const land = scene.landscape();
    const [na, nb] = scene.grid_shape();
    const best = scene.best();
    drawLandscape(land, na, nb, best);
    $("best").textContent = Number.isNaN(best[2])
      ? "nothing feasible"
      : `alpha ${best[0].toFixed(3)}, beta ${best[1].toFixed(3)}, ${best[2].toFixed(3)}`;
    $("alpha").value = best[0];
    $("beta").value = best[1];
    draw();
    status(`${na * nb} views in ${(performance.now() - t0).toFixed(0)} ms`);
  }, 10);
}

function drawLandscape(land, na, nb, best) {
  const c = $("landscape");
  const ctx = c.getContext("2d");
  const w = c.width / na;
  const h = c.height / nb;
  const finite = Array.from(land).filter((v) => !Number.isNaN(v));
  const lo = Math.min(...finite);
  const hi = Math.max(...finite);
  for (let b = 0; b < nb; b++) {
    for (let a = 0; a < na; a++) {
      const v = land[b * na + a];
      if (Number.isNaN(v)) {
        ctx.fillStyle = "#ddd";
      } else {
        const t = hi > lo ? Math.log(v / lo) / Math.log(hi / lo) : 0;
        const g = Math.round(40 + 200 * t);
        ctx.fillStyle = `rgb(${g}, ${g}, 255)`;
      }
      ctx.fillRect(a * w, b * h, w - 1, h - 1);
    }
  }
  c.onclick = (ev) => {
    const rect = c.getBoundingClientRect();
    const a = Math.floor((ev.clientX - rect.left) / w);
    const b = Math.floor((ev.clientY - rect.top) / h);
    const stride = (2 * Math.PI) / na;
    $("alpha").value = -Math.PI + a * stride;
    $("beta").value = b * (Math.PI / (nb - 1));
    draw();
  };
  if (!Number.isNaN(best[2])) {
    const a = Math.round((best[0] + Math.PI) / ((2 * Math.PI) / na)) % na;
    const b = Math.round(best[1] / (Math.PI / (nb - 1)));
    ctx.strokeStyle = "#e67e22";
    ctx.lineWidth = 3;
    ctx.strokeRect(a * w, b * h, w - 1, h - 1);
  }
}

function drawTunnel() {
  const c = $("tunnel");
  const ctx = c.getContext("2d");
  clearCanvas(c);
  const k = Math.round(num("gaps"));
  const r = num("tr");
  let rows;
  try {
    rows = dotted_tunnel_sweep(k, num("clearance"), r, num("tm"), 2 * r * (k + 1) * 8, 120);
  } catch (e) {
    status(e.message);
    return;
  }
  const n = rows.length / 5;
  const col = (j) => Array.from({ length: n }, (_, i) => rows[5 * i + j]);
  const d = col(0);
  const series = [col(1), col(2), col(3)];
  const ymax = Math.max(...series.flat()) * 1.05;
  const x = (v) => ((v - d[0]) / (d[n - 1] - d[0])) * (c.width - 20) + 10;
  const y = (v) => c.height - 10 - (v / ymax) * (c.height - 20);
  series.forEach((s, j) => {
    ctx.strokeStyle = j === 0 ? "#000" : "#2980b9";
    ctx.lineWidth = j === 0 ? 2 : 1;
    ctx.beginPath();
    s.forEach((v, i) => (i ? ctx.lineTo(x(d[i]), y(v)) : ctx.moveTo(x(d[i]), y(v))));
    ctx.stroke();
  });
  if (rows[4] === 0) status("m is above the bound guarantee for this tunnel");
}

await init();
loadScene();
drawTunnel();
$("scene").onchange = loadScene;
$("weight").onchange = applyView;
$("radius").onchange = applyView;
$("alpha").oninput = draw;
$("beta").oninput = draw;
$("sweep").onclick = sweep;
for (const id of ["gaps", "clearance", "tr", "tm"]) $(id).oninput = drawTunnel;
