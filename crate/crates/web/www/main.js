import init, { reference_profiles, state_snapshots, PinnSession } from "./pkg/ocp_pinn_web.js";

const TESTS = ["test1a", "test1b", "test2a", "test2b", "test3"];
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

function plot(canvas, series, { title = "", logY = false } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = { l: 52, r: 12, t: 22, b: 26 };
  ctx.clearRect(0, 0, w, h);
  const tf = logY ? (v) => Math.log10(Math.max(v, 1e-300)) : (v) => v;
  let [x0, x1, y0, y1] = [Infinity, -Infinity, Infinity, -Infinity];
  for (const s of series) {
    s.x.forEach((xv, i) => {
      const yv = tf(s.y[i]);
      if (!Number.isFinite(yv)) return;
      x0 = Math.min(x0, xv); x1 = Math.max(x1, xv);
      y0 = Math.min(y0, yv); y1 = Math.max(y1, yv);
    });
  }
  if (!Number.isFinite(x0)) return;
  if (y1 - y0 < 1e-12) { y0 -= 0.5; y1 += 0.5; }
  if (x1 === x0) x1 = x0 + 1;
  const px = (v) => pad.l + ((v - x0) / (x1 - x0)) * (w - pad.l - pad.r);
  const py = (v) => h - pad.b - ((tf(v) - y0) / (y1 - y0)) * (h - pad.t - pad.b);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad.l, pad.t, w - pad.l - pad.r, h - pad.t - pad.b);
  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  ctx.fillText(title, pad.l, 14);
  const fmt = (v) => (logY ? "1e" + v.toFixed(1) : v.toPrecision(3));
  ctx.fillText(fmt(y1), 2, pad.t + 8);
  ctx.fillText(fmt(y0), 2, h - pad.b);
  ctx.fillText(x0.toPrecision(3), pad.l, h - 8);
  ctx.fillText(x1.toPrecision(3), w - pad.r - 30, h - 8);

  series.forEach((s, k) => {
    ctx.strokeStyle = s.color || COLORS[k % COLORS.length];
    ctx.setLineDash(s.dash || []);
    ctx.beginPath();
    s.x.forEach((xv, i) => {
      const X = px(xv), Y = py(s.y[i]);
      i ? ctx.lineTo(X, Y) : ctx.moveTo(X, Y);
    });
    ctx.stroke();
    if (s.label) {
      ctx.fillStyle = ctx.strokeStyle;
      ctx.fillText(s.label, w - pad.r - 110, pad.t + 14 + 13 * k);
    }
  });
  ctx.setLineDash([]);
}

const range = (n) => Array.from({ length: n }, (_, i) => i);

function setupReference(section) {
  const test = section.querySelector(".test");
  const status = section.querySelector("#ref-status");
  section.querySelector("#ref-run").onclick = () => {
    status.textContent = "solving…";
    setTimeout(() => {
      try {
        const t0 = performance.now();
        const r = reference_profiles(test.value, Number(section.querySelector("#ref-nx").value));
        const x = Array.from(r.x);
        plot(document.getElementById("ref-profiles"), [
          { x, y: Array.from(r.controlled), label: "y(u*) at T" },
          { x, y: Array.from(r.uncontrolled), label: "y(0) at T", dash: [5, 3] },
          { x, y: Array.from(r.control), label: "u* at T" },
        ], { title: "final-time profiles" });
        const costs = Array.from(r.costs);
        plot(document.getElementById("ref-costs"), [{ x: range(costs.length), y: costs, label: "J" }],
          { title: "cost per gradient step", logY: true });
        status.textContent = `${costs.length - 1} steps, J ${costs[0].toExponential(3)} → ${costs.at(-1).toExponential(3)}, ${(performance.now() - t0).toFixed(0)} ms`;
        r.free();
      } catch (e) {
        status.textContent = String(e);
      }
    }, 10);
  };
}

function setupExplorer(section) {
  const test = section.querySelector(".test");
  const slider = section.querySelector("#exp-nu");
  const label = section.querySelector("#exp-nu-value");
  const nx = 161, snaps = 5;
  const draw = () => {
    const nu = Math.pow(10, Number(slider.value));
    label.textContent = nu.toPrecision(3);
    try {
      const s = state_snapshots(test.value, nu, nx, snaps);
      const x = range(nx).map((i) => i / (nx - 1));
      const series = range(snaps).map((k) => ({
        x, y: Array.from(s.slice(k * nx, (k + 1) * nx)),
        color: `hsl(215, 70%, ${20 + 15 * k}%)`,
      }));
      plot(document.getElementById("exp-plot"), series, { title: `${test.value}, ν = ${nu.toPrecision(3)} (x scaled to [0, 1])` });
    } catch (e) {
      label.textContent = String(e);
    }
  };
  slider.oninput = draw;
  test.onchange = draw;
  draw();
}

function setupTraining(section) {
  const test = section.querySelector(".test");
  const status = section.querySelector("#train-status");
  const start = section.querySelector("#train-start");
  const pause = section.querySelector("#train-pause");
  let session = null, running = false, frame = 0;

  const redraw = () => {
    const trace = Array.from(session.nu_trace);
    const xs = range(trace.length);
    plot(document.getElementById("train-nu"), [
      { x: xs, y: trace, label: "ν learned" },
      { x: [0, xs.length - 1], y: [session.nu_true, session.nu_true], label: "ν true", dash: [4, 3] },
    ], { title: "ν per epoch" });
    const x = Array.from(session.x);
    plot(document.getElementById("train-profile"), [
      { x, y: Array.from(session.reference_final_state), label: "y(u*) at T" },
      { x, y: Array.from(session.final_state()), label: "y_PINN at T" },
    ], { title: "final-time state" });
    section.querySelector("#train-terms").textContent = session.loss_terms().join("  ");
  };

  const tick = () => {
    if (!running) return;
    const t0 = performance.now();
    let loss = NaN;
    while (performance.now() - t0 < 30 && !session.finished) loss = session.step(1);
    status.textContent = `epoch ${session.epoch}, loss ${loss.toExponential(3)}, ν ${session.nu.toFixed(4)}`;
    if (++frame % 10 === 0 || session.finished) redraw();
    if (session.finished) { running = false; status.textContent += " (tolerance reached)"; return; }
    requestAnimationFrame(tick);
  };

  start.onclick = () => {
    if (session) session.free();
    status.textContent = "solving the reference problem…";
    setTimeout(() => {
      try {
        session = new PinnSession(test.value, BigInt(section.querySelector("#train-seed").value), 101);
        running = true;
        pause.disabled = false;
        pause.textContent = "Pause";
        requestAnimationFrame(tick);
      } catch (e) {
        status.textContent = String(e);
      }
    }, 10);
  };
  pause.onclick = () => {
    running = !running;
    pause.textContent = running ? "Pause" : "Resume";
    if (running) requestAnimationFrame(tick);
    else redraw();
  };
}

await init();
for (const select of document.querySelectorAll("select.test")) {
  select.innerHTML = TESTS.map((t) => `<option>${t}</option>`).join("");
}
setupReference(document.getElementById("reference"));
setupExplorer(document.getElementById("explorer"));
setupTraining(document.getElementById("training"));
