import init, { revenueCurve, simulateRegret, confidenceEllipse } from "./pkg/pricing_wasm.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c"];

function field(section, name) {
  return section.querySelector(`[name=${name}]`);
}

function num(section, name) {
  return Number(field(section, name).value);
}

function report(section, text, isError = false) {
  const out = section.querySelector("output");
  out.textContent = text;
  out.className = isError ? "err" : "";
}

// Maps data coordinates onto a canvas with a margin for tick labels.
function frame(canvas, xs, ys) {
  const ctx = canvas.getContext("2d");
  const pad = 44;
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y1 - y0 < 1e-12) { y0 -= 1; y1 += 1; }
  const w = canvas.width - 2 * pad, h = canvas.height - 2 * pad;
  const sx = x => pad + ((x - x0) / (x1 - x0 || 1)) * w;
  const sy = y => canvas.height - pad - ((y - y0) / (y1 - y0)) * h;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w, h);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  for (let i = 0; i <= 4; i++) {
    const x = x0 + (x1 - x0) * i / 4, y = y0 + (y1 - y0) * i / 4;
    ctx.fillText(x.toPrecision(3), sx(x) - 10, canvas.height - pad + 14);
    ctx.fillText(y.toPrecision(3), 2, sy(y) + 4);
  }
  return { ctx, sx, sy };
}

function polyline(f, xs, ys, color) {
  const { ctx, sx, sy } = f;
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.6;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(ys[i])) : ctx.moveTo(sx(x), sy(ys[i]))));
  ctx.stroke();
}

function dots(f, pts, color) {
  const { ctx, sx, sy } = f;
  ctx.fillStyle = color;
  for (const [x, y] of pts) ctx.fillRect(sx(x) - 1.5, sy(y) - 1.5, 3, 3);
}

function drawRevenue() {
  const s = document.getElementById("revenue");
  try {
    const r = JSON.parse(revenueCurve(field(s, "link").value, num(s, "a"), num(s, "b"),
      num(s, "pmin"), num(s, "pmax"), 300));
    const f = frame(s.querySelector("canvas"), r.prices, r.revenue.concat([0]));
    polyline(f, r.prices, r.revenue, COLORS[0]);
    f.ctx.fillStyle = COLORS[1];
    f.ctx.beginPath();
    f.ctx.arc(f.sx(r.best_price), f.sy(r.best_revenue), 4, 0, 2 * Math.PI);
    f.ctx.fill();
    report(s, `best price ${r.best_price.toFixed(4)}, revenue ${r.best_revenue.toFixed(4)}`);
  } catch (e) {
    report(s, String(e), true);
  }
}

function drawRegret() {
  const s = document.getElementById("regret");
  report(s, "running...");
  // let the status paint before the synchronous simulation blocks the page
  setTimeout(() => {
    try {
      const t0 = performance.now();
      const r = JSON.parse(simulateRegret(field(s, "exp").value, num(s, "d"), num(s, "T"),
        num(s, "trials"), BigInt(num(s, "seed"))));
      const ts = r.mean[0].map((_, i) => i + 1);
      const f = frame(s.querySelector("canvas"), ts, r.mean.flat().concat([0]));
      r.mean.forEach((m, k) => polyline(f, ts, m, COLORS[k]));
      s.querySelector(".legend").innerHTML = r.policies
        .map((p, k) => `<span style="color:${COLORS[k]}">&#9632; ${p} ${r.mean[k].at(-1).toFixed(2)} &plusmn; ${r.stderr[k].at(-1).toFixed(2)}</span>`)
        .join("");
      report(s, `final mean cumulative regret, ${((performance.now() - t0) / 1000).toFixed(1)} s`);
    } catch (e) {
      report(s, String(e), true);
    }
  }, 10);
}

function drawEllipse() {
  const s = document.getElementById("ellipse");
  try {
    const r = JSON.parse(confidenceEllipse(BigInt(num(s, "seed")), num(s, "n"), num(s, "noise"),
      num(s, "r2"), num(s, "scale"), 300));
    const pts = r.boundary.concat(r.ucb, r.ts, [r.truth]);
    const f = frame(s.querySelector("canvas"), pts.map(p => p[0]), pts.map(p => p[1]));
    dots(f, r.ucb, COLORS[0]);
    dots(f, r.ts, COLORS[1]);
    polyline(f, r.boundary.map(p => p[0]), r.boundary.map(p => p[1]), "#333");
    const { ctx, sx, sy } = f;
    ctx.strokeStyle = "#000";
    ctx.beginPath();
    ctx.arc(sx(r.center[0]), sy(r.center[1]), 5, 0, 2 * Math.PI);
    ctx.moveTo(sx(r.truth[0]) - 6, sy(r.truth[1]));
    ctx.lineTo(sx(r.truth[0]) + 6, sy(r.truth[1]));
    ctx.moveTo(sx(r.truth[0]), sy(r.truth[1]) - 6);
    ctx.lineTo(sx(r.truth[0]), sy(r.truth[1]) + 6);
    ctx.stroke();
    report(s, `n = ${num(s, "n")}, estimate (${r.center.map(v => v.toFixed(3)).join(", ")})`);
  } catch (e) {
    report(s, String(e), true);
  }
}

await init();
document.querySelectorAll("#revenue input, #revenue select").forEach(el => el.addEventListener("input", drawRevenue));
document.querySelectorAll("#ellipse input").forEach(el => el.addEventListener("input", drawEllipse));
document.querySelector("#regret button").addEventListener("click", drawRegret);
drawRevenue();
drawEllipse();
