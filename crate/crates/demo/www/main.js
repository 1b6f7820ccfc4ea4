import init, { recovery, lemma_curve, sample_size_bound } from "./pkg/nsgms_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const list = (id) => $(id).value.split(",").map(Number);

function drawGraph(canvas, p, truth, estimate) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const half = canvas.width / 2;
  const pos = (k, offset) => {
    const t = (2 * Math.PI * k) / p;
    return [offset + half / 2 + 120 * Math.cos(t), canvas.height / 2 + 120 * Math.sin(t)];
  };
  const panel = (edges, offset, title, color) => {
    ctx.fillStyle = "#000";
    ctx.fillText(title, offset + 10, 16);
    ctx.strokeStyle = color;
    for (const [i, j] of edges) {
      const [x0, y0] = pos(i - 1, offset);
      const [x1, y1] = pos(j - 1, offset);
      ctx.beginPath();
      ctx.moveTo(x0, y0);
      ctx.lineTo(x1, y1);
      ctx.stroke();
    }
    for (let k = 0; k < p; k++) {
      const [x, y] = pos(k, offset);
      ctx.fillStyle = "#fff";
      ctx.beginPath();
      ctx.arc(x, y, 10, 0, 2 * Math.PI);
      ctx.fill();
      ctx.stroke();
      ctx.fillStyle = "#000";
      ctx.fillText(String(k + 1), x - 4, y + 4);
    }
  };
  panel(truth, 0, "true graph", "#333");
  panel(estimate, half, "estimate", "#c33");
}

function drawCurve(canvas, rows) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const lx = (v) => Math.log10(v);
  const x0 = lx(rows[0].eta), x1 = lx(rows[rows.length - 1].eta) || x0 + 1;
  const floor = -6;
  const sx = (eta) => 40 + ((lx(eta) - x0) / (x1 - x0 || 1)) * (w - 60);
  const sy = (v) => 10 + ((0.5 - Math.max(Math.log10(Math.max(v, 1e-300)), floor)) / (0.5 - floor)) * (h - 40);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(40, 10, w - 60, h - 40);
  ctx.fillStyle = "#000";
  ctx.fillText("log10 P(|y - Ey| >= eta)", 44, 24);
  for (const [key, color] of [["bound", "#36c"], ["empirical", "#c33"]]) {
    ctx.strokeStyle = color;
    ctx.beginPath();
    rows.forEach((r, k) => (k ? ctx.lineTo : ctx.moveTo).call(ctx, sx(r.eta), sy(r[key])));
    ctx.stroke();
    ctx.fillStyle = color;
    ctx.fillText(key, w - 90, key === "bound" ? 40 : 56);
  }
}

await init();

$("rec-run").onclick = () => {
  try {
    const r = JSON.parse(recovery(num("rec-p"), num("rec-s"), num("rec-b"), num("rec-l"), num("rec-beta"), BigInt(num("rec-seed"))));
    drawGraph($("rec-canvas"), r.p, r.true_edges, r.estimated_edges);
    $("rec-out").textContent =
      `N = ${r.n}, rho_min = ${r.rho_min.toFixed(4)}, lambda = ${r.lambda.toExponential(3)}\n` +
      `sufficient N (eta = 0.1) = ${Math.ceil(r.bound_n)}\n` +
      (r.exact ? "graph recovered exactly" : "estimate differs from the true graph");
  } catch (e) {
    $("rec-out").textContent = String(e);
  }
};

$("lem-run").onclick = () => {
  try {
    const rows = JSON.parse(lemma_curve(new Float64Array(list("lem-a")), new Float64Array(list("lem-b")), num("lem-lo"), num("lem-hi"), 24, num("lem-m"), 1n));
    drawCurve($("lem-canvas"), rows);
  } catch (e) {
    alert(e);
  }
};

$("bnd-run").onclick = () => {
  try {
    const n = sample_size_bound(num("bnd-beta"), num("bnd-rho"), num("bnd-p"), num("bnd-s"), num("bnd-eta"));
    $("bnd-out").textContent = `N >= ${Math.ceil(n)}`;
  } catch (e) {
    $("bnd-out").textContent = String(e);
  }
};
