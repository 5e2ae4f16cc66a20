import init, { generate, cd_curve, WebLab } from "./pkg/lss_web.js";

const $ = (id) => document.getElementById(id);
let lab = null;

function params() {
  return {
    kind: $("kind").value,
    length: Number($("length").value),
    seed: Number($("seed").value),
    snr: $("noisy").checked ? Number($("snr").value) : NaN,
  };
}

function status(text, isError = false) {
  $("status").textContent = text;
  $("status").className = isError ? "err" : "";
}

// yield so the status line paints before a long synchronous call
const later = (fn) => new Promise((res) => setTimeout(() => res(fn()), 20));

async function run(label, fn) {
  status(label + "...");
  try {
    const t0 = performance.now();
    await later(fn);
    status(`${label} done in ${((performance.now() - t0) / 1000).toFixed(1)} s`);
  } catch (e) {
    status(String(e.message ?? e), true);
  }
}

function plotSeries() {
  const p = params();
  const ys = generate(p.kind, p.length, p.seed, p.snr);
  const c = $("seriesCanvas");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  let lo = Infinity, hi = -Infinity;
  for (const y of ys) { lo = Math.min(lo, y); hi = Math.max(hi, y); }
  const span = hi - lo || 1;
  g.strokeStyle = "#1c1c38";
  g.lineWidth = 0.6;
  g.beginPath();
  ys.forEach((y, i) => {
    const x = (i / (ys.length - 1)) * (c.width - 1);
    const v = c.height - 4 - ((y - lo) / span) * (c.height - 8);
    i === 0 ? g.moveTo(x, v) : g.lineTo(x, v);
  });
  g.stroke();
}

function trainLab() {
  if (lab) lab.free();
  lab = new WebLab(Number($("seed").value), 2000, Number($("perKind").value), Number($("epochs").value), 224);
  $("render").disabled = false;
}

function renderSignature() {
  const p = params();
  const rgba = lab.signature(p.kind, p.length, p.seed, p.snr);
  const r = lab.resolution();
  const c = $("lssCanvas");
  c.width = r;
  c.height = r;
  c.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), r, r), 0, 0);
  $("occ").textContent = `occupancy ${lab.occupancy().toFixed(4)}`;
}

function plotCd() {
  const p = params();
  const edMax = 8;
  const out = cd_curve(p.kind, p.length, p.seed, p.snr, edMax, 2000);
  const cd = Array.from(out.slice(0, edMax));
  const label = out[edMax + 1] === 1 ? "non-stochastic (saturates)" : "stochastic (no saturation)";
  const c = $("cdCanvas");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const pad = 24;
  const sx = (ed) => pad + ((ed - 1) / (edMax - 1)) * (c.width - 2 * pad);
  const sy = (v) => c.height - pad - (v / edMax) * (c.height - 2 * pad);
  g.strokeStyle = "#bbc";
  g.setLineDash([4, 4]);
  g.beginPath(); g.moveTo(sx(1), sy(1)); g.lineTo(sx(edMax), sy(edMax)); g.stroke();
  g.setLineDash([]);
  g.strokeStyle = "#1c1c38";
  g.fillStyle = "#1c1c38";
  g.beginPath();
  cd.forEach((v, i) => (i === 0 ? g.moveTo(sx(i + 1), sy(v)) : g.lineTo(sx(i + 1), sy(v))));
  g.stroke();
  cd.forEach((v, i) => { g.beginPath(); g.arc(sx(i + 1), sy(v), 3, 0, 2 * Math.PI); g.fill(); });
  g.fillText("ED", c.width - pad, c.height - 6);
  g.fillText("CD", 4, pad - 8);
  $("cdLabel").textContent = `${label}; CD(${edMax}) = ${cd[edMax - 1].toFixed(2)}`;
}

await init();
$("plot").onclick = () => run("Plotting", plotSeries);
$("train").onclick = () => run("Training encoders", trainLab);
$("render").onclick = () => run("Rendering", renderSignature);
$("cd").onclick = () => run("Correlation dimension", plotCd);
status("Ready. Train the encoders before rendering signatures.");
