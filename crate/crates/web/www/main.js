import init, { field, simulate, inspect } from "./pkg/softds_web.js";

const DEFAULT_SCENARIO = {
  metadata: { name: "demo" },
  ds: { kind: "linear", attractor: [0, 0], gain_matrix: [[-1, 0], [0, -1]] },
  obstacles: [
    { center: [4, 0.3], hard_semi_axes: [1, 1], soft_ratio: 1.5, orientation_rad: Math.PI },
    { center: [2.2, -2], hard_semi_axes: [1.2, 0.5], soft_ratio: 1.5, orientation_rad: Math.PI - 0.4 },
  ],
  strategy: { c: 0.3 },
  integration: { dt: 0.01, max_steps: 5000, eps_conv: 1e-3, target: { center: [0, 0], radius: 0.5 } },
  starts: { points: [[7, 1], [7, -3]] },
};

const canvas = document.getElementById("view");
const ctx = canvas.getContext("2d");
const text = document.getElementById("scenario");
const kInput = document.getElementById("k");
const strategyBox = document.getElementById("strategy");
const status = document.getElementById("status");
const runOut = document.getElementById("run");
const inspectOut = document.getElementById("inspect");

let base = DEFAULT_SCENARIO;
let current = "";
let view = null;
let paths = [];

function scenarioJson() {
  const s = structuredClone(base);
  const ratio = Number(kInput.value) + 1;
  for (const o of s.obstacles) o.soft_ratio = ratio;
  if (!strategyBox.checked) s.strategy = { ...s.strategy, c: 0 };
  return JSON.stringify(s);
}

function toCanvas([x, y]) {
  const { lo, scale } = view;
  return [(x - lo[0]) * scale, canvas.height - (y - lo[1]) * scale];
}

function toWorld(px, py) {
  const { lo, scale } = view;
  return [lo[0] + px / scale, lo[1] + (canvas.height - py) / scale];
}

function outline(o, soft) {
  const pts = [];
  const p = o.exponent;
  const [a, b] = o.hard_semi_axes;
  const s = soft ? o.soft_ratio : 1;
  const [c, sn] = [Math.cos(o.orientation_rad), Math.sin(o.orientation_rad)];
  for (let i = 0; i <= 180; i++) {
    const t = (2 * Math.PI * i) / 180;
    const u = [Math.cos(t), Math.sin(t)];
    const level = Math.abs(u[0] / (s * a)) ** (2 * p) + Math.abs(u[1] / (s * b)) ** (2 * p);
    const r = level ** (-1 / (2 * p));
    const lx = u[0] * r, ly = u[1] * r;
    pts.push([o.center[0] + c * lx - sn * ly, o.center[1] + sn * lx + c * ly]);
  }
  return pts;
}

function polygon(pts, fill, stroke) {
  ctx.beginPath();
  pts.forEach((p, i) => (i ? ctx.lineTo(...toCanvas(p)) : ctx.moveTo(...toCanvas(p))));
  ctx.closePath();
  if (fill) { ctx.fillStyle = fill; ctx.fill(); }
  if (stroke) { ctx.strokeStyle = stroke; ctx.stroke(); }
}

function drawField(data) {
  const lo = data.min, hi = data.max;
  const span = Math.max(hi[0] - lo[0], hi[1] - lo[1]);
  view = { lo, scale: canvas.width / span };
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  for (const o of data.obstacles) {
    polygon(outline(o, true), "rgba(120,180,255,0.25)", "#6aa0e0");
    polygon(outline(o, false), "#555", null);
  }
  const cell = canvas.width / data.counts[0];
  ctx.strokeStyle = "#888";
  for (const pt of data.points) {
    if (!pt.v) continue;
    const n = Math.hypot(pt.v[0], pt.v[1]);
    if (n === 0) continue;
    const [px, py] = toCanvas([pt.x, pt.y]);
    const len = 0.4 * cell;
    const dx = (pt.v[0] / n) * len, dy = (-pt.v[1] / n) * len;
    ctx.beginPath();
    ctx.moveTo(px - dx / 2, py - dy / 2);
    ctx.lineTo(px + dx / 2, py + dy / 2);
    ctx.stroke();
    ctx.fillStyle = "#888";
    ctx.fillRect(px + dx / 2 - 1, py + dy / 2 - 1, 2, 2);
  }
  const [ax, ay] = toCanvas(data.attractor);
  ctx.fillStyle = "#d22";
  ctx.beginPath();
  ctx.arc(ax, ay, 5, 0, 2 * Math.PI);
  ctx.fill();
  for (const p of paths) drawPath(p);
}

function drawPath(run) {
  ctx.lineWidth = 2;
  for (let i = 1; i < run.path.length; i++) {
    ctx.strokeStyle = run.soft[i] ? "#e08000" : "#1a7f37";
    ctx.beginPath();
    ctx.moveTo(...toCanvas(run.path[i - 1]));
    ctx.lineTo(...toCanvas(run.path[i]));
    ctx.stroke();
  }
  ctx.lineWidth = 1;
}

function refresh() {
  document.getElementById("klog").textContent = Number(kInput.value).toFixed(2);
  current = scenarioJson();
  try {
    drawField(JSON.parse(field(current, 32, 32)));
    status.textContent = "";
  } catch (e) {
    status.textContent = String(e);
  }
}

function fmt(v) {
  return typeof v === "number" ? v.toPrecision(4) : v;
}

canvas.addEventListener("click", (ev) => {
  if (!view) return;
  const [x, y] = toWorld(ev.offsetX, ev.offsetY);
  try {
    const run = JSON.parse(simulate(current, x, y));
    paths.push(run);
    drawPath(run);
    runOut.textContent = [
      `start (${fmt(x)}, ${fmt(y)})`,
      `converged ${run.converged} in ${run.steps} steps`,
      `navigation time ${fmt(run.navigation_time)}`,
      `min gamma ${fmt(run.min_gamma)}`,
      `soft-region mean speed ${fmt(run.soft_region_mean_speed)}`,
      run.failure ? `stopped: ${run.failure}` : "",
    ].join("\n");
  } catch (e) {
    runOut.textContent = String(e);
  }
});

canvas.addEventListener("mousemove", (ev) => {
  if (!view) return;
  const [x, y] = toWorld(ev.offsetX, ev.offsetY);
  try {
    const r = JSON.parse(inspect(current, x, y));
    const lines = [`(${fmt(x)}, ${fmt(y)})`];
    r.obstacles.forEach((o, i) => lines.push(`obstacle ${i}: ${o.region}  gamma ${fmt(o.gamma)}  gamma_k ${fmt(o.gamma_k)}`));
    if (r.velocity) {
      const v = r.velocity;
      const n = (a) => fmt(Math.hypot(a[0], a[1]));
      lines.push(`|f| ${n(v.nominal)}  |Mf| ${n(v.modulated)}  |v| ${n(v.velocity)}`);
    }
    inspectOut.textContent = lines.join("\n");
  } catch (e) {
    inspectOut.textContent = String(e);
  }
});

kInput.addEventListener("input", () => { paths = []; refresh(); });
strategyBox.addEventListener("change", () => { paths = []; refresh(); });
document.getElementById("apply").addEventListener("click", () => {
  try {
    base = JSON.parse(text.value);
    paths = [];
    refresh();
  } catch (e) {
    status.textContent = String(e);
  }
});

await init();
text.value = JSON.stringify(DEFAULT_SCENARIO, null, 2);
refresh();
