import init, { clan_profile, lambda_curve, compensated_curve } from "./pkg/bpire_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

// Axes-and-polyline plotting on a canvas. series: [{xs, ys, color, dots, bars, lo, hi}]
function plot(canvas, series, { logx = false, ymin, ymax, xlabel = "", ylabel = "" } = {}) {
  const g = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, L = 55, R = 10, T = 10, B = 30;
  g.clearRect(0, 0, W, H);
  const tx = (x) => (logx ? Math.log10(x) : x);
  const all = series.flatMap((s) => s.xs.map(tx));
  const ys = series.flatMap((s) => [...s.ys, ...(s.lo || []), ...(s.hi || [])]).filter(Number.isFinite);
  let [x0, x1] = [Math.min(...all), Math.max(...all)];
  let y0 = ymin ?? Math.min(...ys), y1 = ymax ?? Math.max(...ys);
  if (x0 === x1) x1 = x0 + 1;
  if (y0 === y1) y1 = y0 + 1;
  const px = (x) => L + ((tx(x) - x0) / (x1 - x0)) * (W - L - R);
  const py = (y) => H - B - ((y - y0) / (y1 - y0)) * (H - T - B);
  g.strokeStyle = "#999";
  g.strokeRect(L, T, W - L - R, H - T - B);
  g.fillStyle = "#444";
  g.font = "11px sans-serif";
  for (let k = 0; k <= 4; k++) {
    const y = y0 + ((y1 - y0) * k) / 4;
    g.fillText(y.toPrecision(3), 4, py(y) + 4);
    const x = x0 + ((x1 - x0) * k) / 4;
    g.fillText((logx ? "1e" + x.toFixed(1) : x.toPrecision(3)), L + ((x - x0) / (x1 - x0)) * (W - L - R) - 12, H - 12);
  }
  g.fillText(xlabel, W - R - 8 * xlabel.length, H - 2);
  g.fillText(ylabel, L + 4, T + 12);
  for (const s of series) {
    g.strokeStyle = g.fillStyle = s.color || "#1565c0";
    if (s.bars) {
      const w = Math.max(1, (W - L - R) / s.xs.length - 1);
      s.xs.forEach((x, k) => g.fillRect(px(x) - w / 2, py(s.ys[k]), w, py(y0) - py(s.ys[k])));
      continue;
    }
    g.beginPath();
    s.xs.forEach((x, k) => (k ? g.lineTo(px(x), py(s.ys[k])) : g.moveTo(px(x), py(s.ys[k]))));
    g.stroke();
    if (s.lo) {
      s.xs.forEach((x, k) => {
        g.beginPath();
        g.moveTo(px(x), py(s.lo[k]));
        g.lineTo(px(x), py(s.hi[k]));
        g.stroke();
      });
    }
    if (s.dots) s.xs.forEach((x, k) => g.fillRect(px(x) - 2, py(s.ys[k]) - 2, 4, 4));
  }
}

function guard(out, f) {
  out.classList.remove("err");
  try {
    f();
  } catch (e) {
    out.textContent = String(e);
    out.classList.add("err");
  }
}

function runProfile() {
  guard($("p-out"), () => {
    const n = num("p-n");
    const v = clan_profile(num("p-sigma"), n, BigInt(num("p-seed")));
    const idx = [...Array(n + 1).keys()];
    const walk = Array.from(v.slice(0, n + 1));
    const prob = Array.from(v.slice(n + 1, 2 * n + 2));
    const sizes = Array.from(v.slice(2 * n + 2));
    plot($("p-walk"), [{ xs: idx, ys: walk }], { xlabel: "k", ylabel: "S_k" });
    const top = Math.max(...sizes, 1);
    plot($("p-clans"), [
      { xs: idx, ys: sizes.map((z) => z / top), bars: true, color: "#90caf9" },
      { xs: idx, ys: prob.map((p) => p / Math.max(...prob, 1e-300)), color: "#c62828", dots: true },
    ], { ymin: 0, ymax: 1, xlabel: "clan i", ylabel: "clan size (bars) and P(only clan i alive | S) (dots), each scaled to its max" });
    const total = prob.reduce((a, b) => a + b, 0);
    const alive = sizes.filter((z) => z > 0).length;
    $("p-out").textContent =
      `population at n: ${sizes.reduce((a, b) => a + b, 0)} in ${alive} clan(s); ` +
      `P(a single clan holds everyone | S) = ${total.toPrecision(4)}`;
  });
}

function runLambda() {
  guard($("l-out"), () => {
    const v = lambda_curve(num("l-sigma"), num("l-n"), num("l-rho"), -4, 2, 13, num("l-m"), BigInt(num("l-seed")));
    const xs = [], ys = [], lo = [], hi = [];
    for (let k = 0; k < v.length; k += 3) {
      xs.push(v[k]); ys.push(v[k + 1]);
      lo.push(v[k + 1] - 2 * v[k + 2]); hi.push(v[k + 1] + 2 * v[k + 2]);
    }
    plot($("l-plot"), [{ xs, ys, lo, hi, dots: true }], { logx: true, ymin: 0, ymax: 1, xlabel: "β", ylabel: "Λ̂(β) ± 2 se" });
    $("l-out").textContent = xs.map((b, k) => `β=${b.toExponential(1)}  Λ̂=${ys[k].toFixed(4)}`).join("\n");
  });
}

function runScaling() {
  guard($("s-out"), () => {
    const v = compensated_curve(1.0, $("s-regime").value, num("s-param"), num("s-kmin"), num("s-kmax"), num("s-m"), BigInt(num("s-seed")));
    const rows = (v.length - 2) / 5;
    const xs = [], ys = [], lo = [], hi = [];
    const lines = [];
    for (let r = 0; r < rows; r++) {
      const [n, mean, se, c, cse] = v.slice(5 * r, 5 * r + 5);
      xs.push(n); ys.push(c); lo.push(c - 2 * cse); hi.push(c + 2 * cse);
      lines.push(`n=${n}  Ê=${mean.toExponential(3)} ± ${se.toExponential(1)}  compensated=${c.toFixed(4)}`);
    }
    plot($("s-plot"), [{ xs, ys, lo, hi, dots: true, color: "#2e7d32" }], { logx: true, ymin: 0, xlabel: "n", ylabel: "compensated Ê ± 2 se" });
    lines.push(`fitted slope ${v[v.length - 2].toFixed(3)} ± ${v[v.length - 1].toFixed(3)}`);
    $("s-out").textContent = lines.join("\n");
  });
}

const defaults = { end: 3, fixed: 2, proportional: 0.5 };

await init();
$("p-run").onclick = runProfile;
$("l-run").onclick = runLambda;
$("s-run").onclick = runScaling;
$("s-regime").onchange = () => ($("s-param").value = defaults[$("s-regime").value]);
runProfile();
