import init, { FvSim, MicroSim, kernel_profile } from "./pkg/multiscale_web.js";

const PRESETS = ["case1-growth", "case2-frag", "case3-both", "appendixA-none", "appendixA-noD"];
const T_FINAL = 100;
const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function heatmap(canvas, values, n) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(n, n);
  const max = Math.max(...values) || 1;
  for (let j = 0; j < n; j++) {
    for (let i = 0; i < n; i++) {
      // row 0 is the bottom of the domain
      const v = Math.round(255 * (1 - values[j * n + i] / max));
      const p = 4 * ((n - 1 - j) * n + i);
      img.data[p] = v;
      img.data[p + 1] = v;
      img.data[p + 2] = 255;
      img.data[p + 3] = 255;
    }
  }
  const off = new OffscreenCanvas(n, n);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function bars(canvas, xs, ys, label) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const max = Math.max(...ys) || 1;
  const bw = (w - 40) / ys.length;
  ctx.fillStyle = "#4a6fa5";
  ys.forEach((y, k) => {
    const bh = (h - 40) * (y / max);
    ctx.fillRect(30 + k * bw, h - 20 - bh, bw - 2, bh);
  });
  ctx.fillStyle = "#222";
  ctx.fillText(label, 30, 14);
  ctx.fillText(xs[0].toFixed(2), 30, h - 5);
  ctx.fillText(xs[xs.length - 1].toFixed(2), w - 40, h - 5);
}

function line(canvas, ys, extent) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const max = Math.max(...ys) || 1;
  ctx.strokeStyle = "#b23a48";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ys.forEach((y, i) => {
    const px = (i / (ys.length - 1)) * w;
    const py = h - 15 - (h - 30) * (y / max);
    i ? ctx.lineTo(px, py) : ctx.moveTo(px, py);
  });
  ctx.stroke();
  ctx.fillStyle = "#222";
  ctx.fillText(`-${extent}`, 2, h - 2);
  ctx.fillText(`${extent}`, w - 20, h - 2);
  ctx.fillText(`peak ${max.toExponential(3)}`, 4, 12);
}

function runner(step) {
  let handle = null;
  const tick = () => {
    if (step()) handle = requestAnimationFrame(tick);
    else handle = null;
  };
  return {
    start() { this.stop(); handle = requestAnimationFrame(tick); },
    stop() { if (handle !== null) cancelAnimationFrame(handle); handle = null; },
  };
}

function setupFv() {
  let sim = null;
  const loop = runner(() => {
    const target = Math.min(T_FINAL, sim.time() + 1);
    try {
      sim.advance_to(target);
    } catch (e) {
      $("fv-status").textContent = `error: ${e}`;
      return false;
    }
    const n = sim.nx();
    heatmap($("fv-spatial"), sim.spatial(), n);
    bars($("fv-size"), sim.radii(), sim.size(), "mass per radius bin");
    $("fv-status").textContent = `t = ${sim.time().toFixed(2)}   mass = ${sim.mass().toFixed(5)}`;
    return sim.time() < T_FINAL;
  });
  $("fv-start").onclick = () => {
    try {
      sim?.free();
      sim = new FvSim($("fv-scale").value, $("fv-preset").value, num("fv-half"), num("fv-nx"), num("fv-nr"), num("fv-eps"));
      loop.start();
    } catch (e) {
      $("fv-status").textContent = `error: ${e}`;
    }
  };
  $("fv-pause").onclick = () => loop.stop();
}

function setupMicro() {
  let sim = null;
  let half = 1;
  const draw = () => {
    const c = $("mi-canvas");
    const ctx = c.getContext("2d");
    ctx.clearRect(0, 0, c.width, c.height);
    const p = sim.particles();
    const scale = c.width / (2 * half);
    for (let n = 0; n < p.length; n += 3) {
      const shade = Math.round(200 * (1 - (p[n + 2] - 0.14) / 0.86));
      ctx.fillStyle = `rgb(${shade},${shade},255)`;
      ctx.beginPath();
      ctx.arc((p[n] + half) * scale, (half - p[n + 1]) * scale, Math.max(1, p[n + 2] * scale * 0.5), 0, 2 * Math.PI);
      ctx.fill();
    }
  };
  const loop = runner(() => {
    sim.advance_to(Math.min(T_FINAL, sim.time() + 0.25));
    draw();
    const capped = sim.capped() ? "   particle cap reached" : "";
    $("mi-status").textContent = `t = ${sim.time().toFixed(2)}   N = ${sim.count()}${capped}`;
    return sim.time() < T_FINAL && !sim.capped();
  });
  $("mi-start").onclick = () => {
    try {
      sim?.free();
      half = num("mi-half");
      sim = new MicroSim($("mi-preset").value, num("mi-n0"), BigInt(num("mi-seed")), half, num("mi-cap"));
      loop.start();
    } catch (e) {
      $("mi-status").textContent = `error: ${e}`;
    }
  };
  $("mi-pause").onclick = () => loop.stop();
}

function setupKernel() {
  const extent = 4;
  const redraw = () => {
    const [r, s, eps] = [num("k-r"), num("k-s"), num("k-eps")];
    const ys = kernel_profile(r, s, eps, extent, 400);
    line($("k-canvas"), Array.from(ys), extent);
    $("k-status").textContent = `r = ${r}  s = ${s}  ε = ${eps}  ∫K dx = rs = ${(r * s).toFixed(3)}`;
  };
  ["k-r", "k-s", "k-eps"].forEach((id) => ($(id).oninput = redraw));
  redraw();
}

await init();
for (const sel of document.querySelectorAll("select.preset")) {
  for (const p of PRESETS) sel.add(new Option(p, p));
}
setupFv();
setupMicro();
setupKernel();
