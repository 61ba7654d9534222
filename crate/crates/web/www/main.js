import init, { plateau_curve, distances, schedule } from "./pkg/fbar_lab_web.js";

const $ = (id) => document.getElementById(id);

function show(id, text, isError = false) {
  const el = $(id);
  el.textContent = text;
  el.className = isError ? "error" : "";
}

function plot(canvas, series) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.y);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const pad = 24;
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (width - 2 * pad);
  const sy = (y) => height - pad - ((y - y0) / (y1 - y0)) * (height - 2 * pad);
  ctx.strokeStyle = "#ccc";
  ctx.beginPath();
  ctx.moveTo(pad, sy(0));
  ctx.lineTo(width - pad, sy(0));
  ctx.stroke();
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.x.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(s.y[i])) : ctx.moveTo(sx(x), sy(s.y[i]))));
    ctx.stroke();
  }
  ctx.fillStyle = "#555";
  ctx.fillText(y1.toPrecision(3), 2, pad - 8);
  ctx.fillText(y0.toPrecision(3), 2, height - 6);
}

function runPlateau() {
  try {
    const r = JSON.parse(plateau_curve($("pq-x").value, $("pq-y").value, Number($("plateau-n").value), Number($("plateau-mu").value), 1200));
    plot($("plateau-canvas"), [
      { x: r.x, y: r.profile, color: "#999" },
      { x: r.x, y: r.poly, color: "#c33" },
    ]);
    show("plateau-out", `q = ${r.q}, q_next = ${r.q_next}, 1/eta = ${r.inv_eta}, degree ${r.degree}\nplateau margin ${r.plateau_pass ? "holds" : "fails"}, slope margin ${r.slope_pass ? "holds" : "fails"}`);
  } catch (e) {
    show("plateau-out", String(e), true);
  }
}

function runDistances() {
  try {
    const r = JSON.parse(distances($("word-a").value, $("word-b").value));
    show("distances-out", `length ${r.length}, longest common subsequence ${r.common}\nf-bar ${r.fbar.toFixed(4)}, Hamming ${r.hamming.toFixed(4)}`);
  } catch (e) {
    show("distances-out", String(e), true);
  }
}

function runSchedule() {
  try {
    const r = JSON.parse(schedule($("law").value, $("mode").value, Number($("steps").value)));
    plot($("schedule-canvas"), [{ x: r.alpha.map((_, i) => i), y: r.alpha, color: "#36c" }]);
    const last = r.alpha[r.alpha.length - 1];
    show("schedule-out", `final alpha ${last.toFixed(6)}, strictly increasing ${r.strictly_increasing}\nfirst step with alpha >= 1/2: ${r.first_crossing ?? "none"}, stalls at: ${r.plateau ?? "none"}`);
  } catch (e) {
    show("schedule-out", String(e), true);
  }
}

await init();
$("plateau-run").addEventListener("click", runPlateau);
$("distances-run").addEventListener("click", runDistances);
$("schedule-run").addEventListener("click", runSchedule);
runPlateau();
runDistances();
runSchedule();
