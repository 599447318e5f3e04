import init, { randomMatrix, svdSpectrum, filterForExpert, captionScores } from "./pkg/more_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseInt($(id).value, 10);

function drawSpectrum(canvas, s, retained) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const max = s[0] || 1;
  const w = canvas.width / s.length;
  s.forEach((v, i) => {
    const h = (v / max) * (canvas.height - 10);
    ctx.fillStyle = i < retained ? "#2a6fdb" : "#ccc";
    ctx.fillRect(i * w + 1, canvas.height - h, Math.max(w - 2, 1), h);
  });
}

function drawHeatmap(canvas, data, rows, cols, scale) {
  const ctx = canvas.getContext("2d");
  const cw = canvas.width / cols;
  const ch = canvas.height / rows;
  for (let r = 0; r < rows; r++) {
    for (let c = 0; c < cols; c++) {
      const v = Math.max(-1, Math.min(1, data[r * cols + c] / scale));
      const a = Math.round(255 * (1 - Math.abs(v)));
      ctx.fillStyle = v >= 0 ? `rgb(255,${a},${a})` : `rgb(${a},${a},255)`;
      ctx.fillRect(c * cw, r * ch, Math.ceil(cw), Math.ceil(ch));
    }
  }
}

function fmt(x) {
  return x.toFixed(4);
}

function updateFilter() {
  const rows = num("rows"), cols = num("cols"), experts = num("experts");
  const slider = $("expert");
  slider.max = experts;
  if (num("expert") > experts) slider.value = experts;
  const index = num("expert");
  $("expert-label").textContent = index;
  try {
    const w = randomMatrix(rows, cols, num("seed"));
    const s = svdSpectrum(rows, cols, w);
    const out = filterForExpert(rows, cols, w, index, experts);
    const [k, retained, full, removed] = out.slice(rows * cols);
    const scale = Math.max(...w.map(Math.abs));
    drawSpectrum($("spectrum"), s, retained);
    drawHeatmap($("original"), w, rows, cols, scale);
    drawHeatmap($("filtered"), out.slice(0, rows * cols), rows, cols, scale);
    $("filter-info").textContent =
      `k = ${fmt(k)}, keeps ${retained} of ${full} singular values, removed Frobenius norm ${fmt(removed)}`;
    const table = ["<tr><th>expert</th><th>k</th><th>rank kept</th><th>removed norm</th></tr>"];
    for (let i = 1; i <= experts; i++) {
      const v = filterForExpert(rows, cols, w, i, experts).slice(rows * cols);
      table.push(`<tr><td>${i}</td><td>${fmt(v[0])}</td><td>${v[1]}/${v[2]}</td><td>${fmt(v[3])}</td></tr>`);
    }
    $("experts-table").innerHTML = table.join("");
  } catch (e) {
    $("filter-info").innerHTML = `<span class="err">${e.message ?? e}</span>`;
  }
}

function updateScores() {
  try {
    const r = JSON.parse(captionScores($("hyp").value, $("refs").value));
    const rows = [
      ...r.bleu.map((b, i) => [`BLEU-${i + 1}`, b]),
      ["METEOR (exact)", r.meteor_exact],
      ["ROUGE-L", r.rouge_l],
    ];
    $("scores").innerHTML = rows.map(([n, v]) => `<tr><th>${n}</th><td>${fmt(v)}</td></tr>`).join("");
  } catch (e) {
    $("scores").innerHTML = `<tr><td class="err">${e.message ?? e}</td></tr>`;
  }
}

await init();
for (const id of ["rows", "cols", "seed", "experts", "expert"]) $(id).addEventListener("input", updateFilter);
for (const id of ["hyp", "refs"]) $(id).addEventListener("input", updateScores);
updateFilter();
updateScores();
