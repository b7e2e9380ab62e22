// Front end for the wasm module built by wasm-bindgen into ./pkg.
import init, { WasmDemo } from "./pkg/wavepencil_web.js";

const $ = (id) => document.getElementById(id);
let demo = null;
let spectrum = null;
let mode = null;
let seed = 1;

function status(text, error = false) {
  $("status").textContent = text;
  $("status").className = error ? "error" : "";
}

function config() {
  const num = (id) => parseFloat($(id).value);
  const geometry = { outer: { w: num("w"), h: num("h") }, inclusion: null };
  if ($("loaded").checked) {
    geometry.inclusion = { x0: num("x0"), y0: num("y0"), x1: num("x1"), y1: num("y1") };
  }
  return { geometry, materials: { eps1: num("eps1"), eps2: num("eps2") }, mesh_h: num("mesh_h"), diagnostics: { samples: 40 } };
}

// Complex-plane view: square canvas showing |Re|, |Im| ≤ r.
function plane(canvas, r) {
  const ctx = canvas.getContext("2d");
  const s = canvas.width / (2 * r);
  const toX = (x) => canvas.width / 2 + x * s;
  const toY = (y) => canvas.height / 2 - y * s;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#ddd";
  ctx.beginPath();
  ctx.moveTo(0, toY(0)); ctx.lineTo(canvas.width, toY(0));
  ctx.moveTo(toX(0), 0); ctx.lineTo(toX(0), canvas.height);
  ctx.stroke();
  return { ctx, s, toX, toY };
}

function drawDisks(view, disks) {
  if (!disks) return;
  const { ctx, s, toX, toY } = view;
  ctx.strokeStyle = "#2a7";
  for (const c of [disks.p, -disks.p]) {
    ctx.beginPath();
    ctx.arc(toX(c), toY(0), disks.r * s, 0, 2 * Math.PI);
    ctx.stroke();
  }
  ctx.lineWidth = 3;
  for (const [a, b] of [disks.i_minus, disks.i_plus]) {
    ctx.beginPath(); ctx.moveTo(toX(a), toY(0)); ctx.lineTo(toX(b), toY(0)); ctx.stroke();
  }
  ctx.lineWidth = 1;
}

function drawSpectrum() {
  if (!spectrum) return;
  const r = parseFloat($("zoom").value) || 3;
  const view = plane($("spectrum"), r);
  drawDisks(view, spectrum.disks);
  const { ctx, toX, toY } = view;
  spectrum.points.forEach((p, i) => {
    ctx.fillStyle = mode && mode.index === i ? "#d00" : p.chain > 1 ? "#a0a" : "#036";
    ctx.beginPath();
    ctx.arc(toX(p.re), toY(p.im), mode && mode.index === i ? 5 : 3, 0, 2 * Math.PI);
    ctx.fill();
  });
}

function color(t) {
  const v = Math.max(0, Math.min(1, t));
  return `rgb(${Math.round(255 * v)}, ${Math.round(80 + 100 * (1 - Math.abs(2 * v - 1)))}, ${Math.round(255 * (1 - v))})`;
}

function drawField() {
  if (!mode) return;
  const canvas = $("field");
  const ctx = canvas.getContext("2d");
  const xs = mode.nodes.map((n) => n[0]), ys = mode.nodes.map((n) => n[1]);
  const w = Math.max(...xs), h = Math.max(...ys);
  const s = Math.min(canvas.width / w, canvas.height / h) * 0.95;
  const X = (x) => 0.025 * canvas.width + x * s;
  const Y = (y) => canvas.height - 0.025 * canvas.height - y * s;
  const comp = $("component").value;
  const nodal = comp === "e3" || comp === "h3";
  const vals = mode[comp];
  const max = Math.max(...vals, 1e-300);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  mode.triangles.forEach((t, k) => {
    const v = nodal ? (vals[t[0]] + vals[t[1]] + vals[t[2]]) / 3 : vals[k];
    ctx.fillStyle = color(v / max);
    ctx.strokeStyle = mode.tags[k] === 2 ? "#000" : ctx.fillStyle;
    ctx.beginPath();
    ctx.moveTo(X(mode.nodes[t[0]][0]), Y(mode.nodes[t[0]][1]));
    ctx.lineTo(X(mode.nodes[t[1]][0]), Y(mode.nodes[t[1]][1]));
    ctx.lineTo(X(mode.nodes[t[2]][0]), Y(mode.nodes[t[2]][1]));
    ctx.closePath();
    ctx.fill();
    ctx.stroke();
  });
  $("mode-info").textContent = `mode ${mode.index}: γ = ${mode.re.toFixed(6)} ${mode.im < 0 ? "−" : "+"} ${Math.abs(mode.im).toFixed(6)}i (inclusion outlined)`;
}

function drawQuartic(q) {
  const r = Math.max(3, ...q.roots.map(([a, b]) => Math.hypot(a, b) * 1.1));
  const canvas = $("quartic");
  const view = plane(canvas, r);
  drawDisks(view, q.disks);
  const { ctx, toX, toY } = view;
  q.roots.forEach(([a, b], i) => {
    ctx.fillStyle = q.separated[i] ? (q.on_interval[i] ? "#2a7" : "#036") : "#d00";
    ctx.beginPath(); ctx.arc(toX(a), toY(b), 4, 0, 2 * Math.PI); ctx.fill();
  });
  const fmt = ([a, b]) => `${a.toFixed(5)} ${b < 0 ? "−" : "+"} ${Math.abs(b).toFixed(5)}i`;
  $("quartic-info").textContent =
    `seed ${q.seed}, θ = ${q.theta.toFixed(4)}\n` +
    q.roots.map((z, i) => `${fmt(z)}  ${q.on_interval[i] ? "on I±" : "off the intervals"}${q.separated[i] ? "" : "  (not separated!)"}`).join("\n");
}

function solve() {
  status("solving…");
  setTimeout(() => {
    try {
      if (demo) demo.free();
      demo = new WasmDemo(JSON.stringify(config()));
      spectrum = JSON.parse(demo.spectrum());
      mode = null;
      status(`${spectrum.unknowns} unknowns, ${spectrum.triangles} triangles, ${spectrum.points.length} eigenvalues kept, ${spectrum.excluded} degeneration points removed` +
        (spectrum.note ? ` — ${spectrum.note}` : ""));
      drawSpectrum();
      if (spectrum.points.length) showMode(0);
    } catch (e) {
      demo = null;
      status(String(e.message || e), true);
    }
  }, 10);
}

function showMode(i) {
  try {
    mode = JSON.parse(demo.mode(i));
    drawSpectrum();
    drawField();
  } catch (e) {
    status(String(e.message || e), true);
  }
}

$("spectrum").addEventListener("click", (ev) => {
  if (!spectrum) return;
  const canvas = $("spectrum");
  const rect = canvas.getBoundingClientRect();
  const r = parseFloat($("zoom").value) || 3;
  const s = canvas.width / (2 * r);
  const x = (ev.clientX - rect.left - canvas.width / 2) / s;
  const y = (canvas.height / 2 - (ev.clientY - rect.top)) / s;
  let best = -1, dist = Infinity;
  spectrum.points.forEach((p, i) => {
    const d = Math.hypot(p.re - x, p.im - y);
    if (d < dist) { dist = d; best = i; }
  });
  if (best >= 0) showMode(best);
});
$("cfg").addEventListener("submit", (ev) => { ev.preventDefault(); solve(); });
$("zoom").addEventListener("change", drawSpectrum);
$("component").addEventListener("change", drawField);
$("roll").addEventListener("click", () => {
  if (!demo) return;
  try {
    drawQuartic(JSON.parse(demo.quartic(BigInt(seed++))));
  } catch (e) {
    status(String(e.message || e), true);
  }
});

init().then(solve, (e) => status(`failed to load the wasm module: ${e}`, true));
