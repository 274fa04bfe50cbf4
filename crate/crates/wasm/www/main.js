import init, { first_eigenpair, torsion, lambda_curve } from "./pkg/plap_wasm.js";

const $ = (id) => document.getElementById(id);
const status = (s) => { $("status").textContent = s; };

function inputs() {
  return { shape: $("shape").value, n: +$("n").value, p: +$("p").value };
}

// Blue-white-red map, symmetric around zero.
function colour(t) {
  const a = Math.min(1, Math.abs(t));
  const c = Math.round(255 * (1 - a));
  return t >= 0 ? [255, c, c] : [c, c, 255];
}

function drawField(sol) {
  const cv = $("field");
  const ctx = cv.getContext("2d");
  const { rows, cols } = sol;
  const f = sol.field();
  const max = f.reduce((m, v) => Math.max(m, Math.abs(v)), 0) || 1;
  ctx.clearRect(0, 0, cv.width, cv.height);
  if (rows === 1) {
    plotLine(cv, Array.from(f, (v, i) => [i / (cols - 1), v]), "x", "u");
    return;
  }
  const img = ctx.createImageData(cols, rows);
  for (let r = 0; r < rows; r++) {
    for (let c = 0; c < cols; c++) {
      // Row 0 is y = 0; draw it at the bottom.
      const k = 4 * ((rows - 1 - r) * cols + c);
      const [R, G, B] = colour(f[r * cols + c] / max);
      img.data.set([R, G, B, 255], k);
    }
  }
  const tmp = document.createElement("canvas");
  tmp.width = cols;
  tmp.height = rows;
  tmp.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(tmp, 0, 0, cv.width, cv.height);
}

function plotLine(cv, pts, xlab, ylab) {
  const ctx = cv.getContext("2d");
  const pad = 45;
  const W = cv.width - 2 * pad, H = cv.height - 2 * pad;
  const xs = pts.map((q) => q[0]), ys = pts.map((q) => q[1]);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y1 === y0) { y0 -= 1; y1 += 1; }
  const X = (x) => pad + (W * (x - x0)) / (x1 - x0 || 1);
  const Y = (y) => pad + H - (H * (y - y0)) / (y1 - y0);
  ctx.clearRect(0, 0, cv.width, cv.height);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, W, H);
  ctx.fillStyle = "#000";
  ctx.font = "12px sans-serif";
  ctx.fillText(x0.toPrecision(3), pad, pad + H + 15);
  ctx.fillText(x1.toPrecision(3), pad + W - 20, pad + H + 15);
  ctx.fillText(y1.toPrecision(4), 2, pad + 4);
  ctx.fillText(y0.toPrecision(4), 2, pad + H);
  ctx.fillText(xlab, pad + W / 2, pad + H + 30);
  ctx.fillText(ylab, pad + W / 2, pad - 10);
  ctx.strokeStyle = "#c22";
  ctx.beginPath();
  pts.forEach(([x, y], i) => (i ? ctx.lineTo(X(x), Y(y)) : ctx.moveTo(X(x), Y(y))));
  ctx.stroke();
  ctx.fillStyle = "#c22";
  if (pts.length < 60) pts.forEach(([x, y]) => ctx.fillRect(X(x) - 2, Y(y) - 2, 4, 4));
}

// Let the status line paint before a blocking solve.
function run(label, f) {
  status(label + "...");
  setTimeout(() => {
    const t = performance.now();
    try {
      status(f() + `\n${((performance.now() - t) / 1000).toFixed(2)} s`);
    } catch (e) {
      status("error: " + (e.message ?? e));
    }
  }, 20);
}

$("eigen").onclick = () => run("solving", () => {
  const { shape, n, p } = inputs();
  const s = first_eigenpair(shape, n, p);
  drawField(s);
  const out = `lambda_1 = ${s.value.toPrecision(12)}  (p = ${p})\nresidual ${s.residual.toExponential(2)}, ${s.iterations} iterations`;
  s.free();
  return out;
});

$("torsion").onclick = () => run("solving", () => {
  const { shape, n, p } = inputs();
  const s = torsion(shape, n, p);
  drawField(s);
  const out = `max w = ${s.value.toPrecision(12)}  (p = ${p})\nresidual ${s.residual.toExponential(2)}, ${s.iterations} iterations`;
  s.free();
  return out;
});

$("curve").onclick = () => run("sweeping", () => {
  const { shape, n } = inputs();
  const c = lambda_curve(shape, n, +$("pmin").value, +$("pmax").value, +$("count").value);
  const pts = [];
  for (let i = 0; i < c.length; i += 2) pts.push([c[i], c[i] * Math.pow(c[i + 1], 1 / c[i])]);
  plotLine($("plot"), pts, "p", "p lambda_1^(1/p)");
  return pts.map(([p, v], i) => `p = ${p.toFixed(3)}  lambda = ${c[2 * i + 1].toPrecision(8)}  p lambda^(1/p) = ${v.toPrecision(8)}`).join("\n");
});

init().then(() => status("ready"), (e) => status("failed to load wasm: " + e));
