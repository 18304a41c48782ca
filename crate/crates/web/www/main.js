import init, { mapBenchmark, driftTrace, simulateCircuit } from "./pkg/qkernel_web.js";

const $ = (id) => document.getElementById(id);

function report(id, fn) {
  const out = $(id);
  out.classList.remove("err");
  try {
    return fn();
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e.message ?? e);
    return null;
  }
}

// Red (0.85) to green (1.0).
function shade(f) {
  const x = Math.max(0, Math.min(1, (f - 0.85) / 0.15));
  return `hsl(${Math.round(120 * x)}, 70%, 55%)`;
}

function drawMapping(view) {
  const ctx = $("map-canvas").getContext("2d");
  ctx.clearRect(0, 0, 520, 240);
  const pos = (q) => [80 + q.col * 120, 70 + q.row * 110];
  const byIndex = new Map(view.qubits.map((q) => [q.index, q]));
  for (const [a, b, f] of view.edges) {
    const [x1, y1] = pos(byIndex.get(a));
    const [x2, y2] = pos(byIndex.get(b));
    ctx.strokeStyle = shade(f);
    ctx.lineWidth = 6;
    ctx.beginPath(); ctx.moveTo(x1, y1); ctx.lineTo(x2, y2); ctx.stroke();
  }
  for (const q of view.qubits) {
    const [x, y] = pos(q);
    ctx.fillStyle = shade(q.single);
    ctx.beginPath(); ctx.arc(x, y, 26, 0, 2 * Math.PI); ctx.fill();
    ctx.lineWidth = q.used ? 4 : 1;
    ctx.strokeStyle = q.used ? "#000" : "#888";
    ctx.stroke();
    ctx.fillStyle = "#000";
    ctx.textAlign = "center";
    ctx.font = "12px system-ui";
    ctx.fillText(`Q${q.index}`, x, y - 4);
    if (q.logical !== null) {
      ctx.font = "bold 13px system-ui";
      ctx.fillText(`l${q.logical}`, x, y + 12);
    }
  }
}

function runMapping() {
  report("map-out", () => {
    const view = JSON.parse(mapBenchmark($("map-bench").value, Number($("map-n").value), $("map-naive").checked));
    drawMapping(view);
    $("map-out").textContent =
      `${view.arm}: mapped score ${view.fidelity_score.toFixed(4)}, ` +
      `noisy state fidelity ${view.state_fidelity.toFixed(4)}, ${view.swaps} swaps, ${view.gates} native gates`;
  });
}

function drawTrace(view) {
  const ctx = $("drift-canvas").getContext("2d");
  const [w, h, pad] = [860, 280, 40];
  ctx.clearRect(0, 0, w, h);
  const all = view.calibrated.concat(view.uncalibrated);
  const tMax = Math.max(...all.map((p) => p.t), 1);
  const lo = Math.min(0.9, ...all.map((p) => p.min_two)) - 0.01;
  const x = (t) => pad + ((w - 2 * pad) * t) / tMax;
  const y = (v) => h - pad - ((h - 2 * pad) * (v - lo)) / (1 - lo);
  ctx.strokeStyle = "#ccc";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.font = "11px system-ui";
  ctx.fillText(lo.toFixed(2), 4, h - pad);
  ctx.fillText("1.00", 4, pad + 4);
  ctx.fillText(`${(tMax / 3600).toFixed(0)} h`, w - pad - 10, h - pad + 14);
  for (const t of view.calibrations) {
    ctx.strokeStyle = "rgba(0,0,200,0.15)";
    ctx.beginPath(); ctx.moveTo(x(t), pad); ctx.lineTo(x(t), h - pad); ctx.stroke();
  }
  const line = (pts, key, color, dash) => {
    ctx.strokeStyle = color;
    ctx.setLineDash(dash);
    ctx.lineWidth = 2;
    ctx.beginPath();
    pts.forEach((p, i) => (i ? ctx.lineTo(x(p.t), y(p[key])) : ctx.moveTo(x(p.t), y(p[key]))));
    ctx.stroke();
    ctx.setLineDash([]);
  };
  const thresh = (v, color) => {
    ctx.strokeStyle = color;
    ctx.setLineDash([2, 4]);
    ctx.beginPath(); ctx.moveTo(pad, y(v)); ctx.lineTo(w - pad, y(v)); ctx.stroke();
    ctx.setLineDash([]);
  };
  thresh(view.single_threshold, "#2a7");
  thresh(view.double_threshold, "#a52");
  line(view.calibrated, "min_single", "#2a7", []);
  line(view.calibrated, "min_two", "#a52", []);
  line(view.uncalibrated, "min_single", "#2a7", [6, 4]);
  line(view.uncalibrated, "min_two", "#a52", [6, 4]);
}

function runDrift() {
  report("drift-out", () => {
    const view = JSON.parse(driftTrace(Number($("drift-hours").value), Number($("drift-seed").value)));
    drawTrace(view);
    const [cal, uncal] = view.completed;
    $("drift-out").textContent =
      `solid: calibrated, dashed: uncalibrated; green: worst single-gate, brown: worst coupler.\n` +
      `${view.calibrations.length} calibrations; completed tasks ${cal} vs ${uncal}.`;
  });
}

function drawDistribution(view) {
  const ctx = $("sim-canvas").getContext("2d");
  const [w, h, pad] = [860, 220, 30];
  ctx.clearRect(0, 0, w, h);
  const n = view.outcomes.length;
  const bw = (w - 2 * pad) / n;
  ctx.font = "11px ui-monospace, monospace";
  ctx.textAlign = "center";
  view.outcomes.forEach(([bits, p], i) => {
    const bh = (h - 2 * pad) * p;
    ctx.fillStyle = "#4a7bd0";
    ctx.fillRect(pad + i * bw + 2, h - pad - bh, bw - 4, bh);
    if (n <= 32) {
      ctx.fillStyle = "#333";
      ctx.fillText(bits, pad + (i + 0.5) * bw, h - pad + 14);
    }
  });
}

function runSimulation() {
  report("sim-out", () => {
    const view = JSON.parse(simulateCircuit($("sim-text").value, $("sim-noisy").checked));
    drawDistribution(view);
    const top = [...view.outcomes].sort((a, b) => b[1] - a[1]).slice(0, 4);
    $("sim-out").textContent =
      `readout qubits ${view.qubits.join(", ")}; most likely: ` +
      top.map(([b, p]) => `${b} ${p.toFixed(4)}`).join(", ");
  });
}

await init();
$("map-run").addEventListener("click", runMapping);
$("drift-run").addEventListener("click", runDrift);
$("sim-run").addEventListener("click", runSimulation);
$("drift-hours").addEventListener("input", (e) => ($("drift-hours-label").textContent = e.target.value));
runMapping();
runSimulation();
