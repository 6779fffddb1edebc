import init, { Simulation, evaluate_bounds, cutoff_spectrum, poincare } from "./pkg/euler_align_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function kernelArgs() {
  return [$("variant").value, num("lambda"), num("r0"), num("alpha"), num("tau")];
}

function show(target, text, isError = false) {
  target.textContent = text;
  target.className = isError ? "error" : "";
}

function plotLines(canvas, xs, series, colors, yRange) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const [x0, x1] = [xs[0], xs[xs.length - 1]];
  const [y0, y1] = yRange;
  const px = (x) => ((x - x0) / (x1 - x0 || 1)) * (width - 20) + 10;
  const py = (y) => height - 10 - ((y - y0) / (y1 - y0 || 1)) * (height - 20);
  ctx.strokeStyle = "#ddd";
  ctx.beginPath();
  ctx.moveTo(10, py(0));
  ctx.lineTo(width - 10, py(0));
  ctx.stroke();
  series.forEach((ys, s) => {
    ctx.strokeStyle = colors[s];
    ctx.beginPath();
    ys.forEach((y, i) => (i ? ctx.lineTo(px(xs[i]), py(y)) : ctx.moveTo(px(xs[i]), py(y))));
    ctx.stroke();
  });
}

let sim = null;
let playing = false;

function drawSimulation() {
  const x = sim.x();
  const rho = sim.rho();
  const u = sim.u();
  const all = [...rho, ...u];
  const lo = Math.min(0, ...all);
  const hi = Math.max(...all, sim.envelope_at(sim.time()) || 0);
  const env = sim.envelope_at(sim.time());
  const series = [Array.from(rho), Array.from(u)];
  if (Number.isFinite(env)) series.push(x.map(() => env));
  plotLines($("field"), Array.from(x), series, ["#1f5fbf", "#c0392b", "#999"], [lo, hi]);
  $("clock").textContent = `t = ${sim.time().toFixed(3)}`;
  const d = JSON.parse(sim.diagnostics());
  show(
    $("diag"),
    `mass ${d.mass.toFixed(12)}   entropy ${d.entropy.toExponential(4)}   ` +
      `l1_dev ${d.l1_dev.toExponential(4)}   sup ρ ${d.sup_rho.toFixed(5)}   sup|q| ${d.sup_q.toExponential(4)}\n` +
      "blue: ρ   red: u   grey: logistic envelope for sup ρ",
  );
}

function reset() {
  playing = false;
  $("play").textContent = "play";
  try {
    sim = new Simulation(...kernelArgs(), num("cells"), num("amplitude"), num("mode"), num("supq"));
    drawSimulation();
  } catch (e) {
    sim = null;
    show($("diag"), String(e), true);
  }
}

function frame() {
  if (!playing || !sim) return;
  try {
    sim.advance(0.05);
    drawSimulation();
    requestAnimationFrame(frame);
  } catch (e) {
    playing = false;
    show($("diag"), String(e), true);
  }
}

function evaluate() {
  try {
    const report = JSON.parse(evaluate_bounds(...kernelArgs(), num("m0"), num("bq"), num("brho")));
    show($("bounds"), JSON.stringify(report, null, 2));
  } catch (e) {
    show($("bounds"), String(e), true);
  }
}

function spectrum() {
  const r0 = num("pr0");
  const kmax = Math.max(1, Math.floor(num("kmax")));
  const values = Array.from(cutoff_spectrum(r0, kmax));
  const ks = values.map((_, k) => k);
  try {
    const pc = JSON.parse(poincare(r0));
    const line = ks.map(() => 1 - pc.epsilon);
    plotLines($("chi"), ks, [values, line], ["#1f5fbf", "#c0392b"], [0, 1]);
    show(
      $("poincare"),
      `max |χ̂(k)|, k ≥ 1: ${(1 - pc.epsilon).toFixed(6)} at k = ${pc.argmax_k}\n` +
        `ε = ${pc.epsilon.toFixed(6)}   c (as printed) = ${pc.c_paper.toExponential(4)}   ` +
        `c (rigorous) = ${pc.c_rigorous.toExponential(4)}`,
    );
  } catch (e) {
    plotLines($("chi"), ks, [values], ["#1f5fbf"], [0, 1]);
    show($("poincare"), String(e), true);
  }
}

await init();
$("reset").addEventListener("click", reset);
$("play").addEventListener("click", () => {
  if (!sim) return;
  playing = !playing;
  $("play").textContent = playing ? "pause" : "play";
  if (playing) requestAnimationFrame(frame);
});
$("evaluate").addEventListener("click", evaluate);
$("spectrum").addEventListener("click", spectrum);
reset();
evaluate();
spectrum();
