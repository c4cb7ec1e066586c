import init, { profile_curve, cesaro_curve, semigroup_curve } from './pkg/meanly_demo.js';

const $ = (id) => document.getElementById(id);

function plot(canvas, xs, ys, xlabel, ylabel) {
  const ctx = canvas.getContext('2d');
  const w = canvas.width, h = canvas.height, pad = 45;
  ctx.clearRect(0, 0, w, h);
  const fin = (v) => Number.isFinite(v);
  const px = xs.filter(fin), py = ys.filter(fin);
  if (px.length === 0 || py.length === 0) return;
  let [x0, x1] = [Math.min(...px), Math.max(...px)];
  let [y0, y1] = [Math.min(...py), Math.max(...py)];
  if (x0 === x1) { x0 -= 1; x1 += 1; }
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const sx = (x) => pad + (x - x0) / (x1 - x0) * (w - 2 * pad);
  const sy = (y) => h - pad - (y - y0) / (y1 - y0) * (h - 2 * pad);
  ctx.strokeStyle = '#999';
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = '#333';
  ctx.font = '11px sans-serif';
  ctx.fillText(y1.toPrecision(4), 2, pad + 4);
  ctx.fillText(y0.toPrecision(4), 2, h - pad);
  ctx.fillText(x0.toPrecision(4), pad, h - pad + 14);
  ctx.fillText(x1.toPrecision(4), w - pad - 40, h - pad + 14);
  ctx.fillText(xlabel, w / 2 - 20, h - 8);
  ctx.fillText(ylabel, pad, pad - 8);
  ctx.strokeStyle = '#1565c0';
  ctx.beginPath();
  let started = false;
  xs.forEach((x, i) => {
    if (!fin(x) || !fin(ys[i])) return;
    if (started) ctx.lineTo(sx(x), sy(ys[i])); else { ctx.moveTo(sx(x), sy(ys[i])); started = true; }
  });
  ctx.stroke();
  ctx.fillStyle = '#1565c0';
  xs.forEach((x, i) => {
    if (fin(x) && fin(ys[i])) ctx.fillRect(sx(x) - 2, sy(ys[i]) - 2, 4, 4);
  });
}

// sign(j) * log10(1 + |j|) for indices given as decimal strings
function signedLog(s) {
  const neg = s.startsWith('-');
  const digits = neg ? s.slice(1) : s;
  const lead = parseFloat(digits.slice(0, 15));
  const mag = Math.log10(1 + lead) + Math.max(0, digits.length - 15);
  return neg ? -mag : mag;
}

function guarded(errId, f) {
  return () => {
    $(errId).textContent = '';
    try { f(); } catch (e) { $(errId).textContent = String(e); }
  };
}

function drawProfile() {
  const pts = JSON.parse(profile_curve(Number($('pk').value), $('pflat').checked));
  plot($('pcan'), pts.map((p) => signedLog(p.index)), pts.map((p) => p.logv), 'sign(j) log10(1+|j|)', 'ln v_j');
}

function drawCesaro() {
  const rows = JSON.parse(cesaro_curve($('cop').value, $('cvec').value, $('csch').value, Number($('cp').value)));
  plot($('ccan'), rows.map((r) => r.log10n), rows.map((r) => r.mean), 'log10 N', 'A_N');
  $('ctab').innerHTML = '<tr><th>digits of N</th><th>A_N</th></tr>' +
    rows.map((r) => `<tr><td>${r.n.replace('-', '').length}</td><td>${r.mean.toPrecision(10)}</td></tr>`).join('');
}

function drawSemigroup() {
  const rows = JSON.parse(semigroup_curve($('sfam').value, Number($('sp').value), $('sf').value,
    Number($('sb0').value), Number($('sb1').value), 40));
  plot($('scan'), rows.map((r) => Math.log10(r.b)), rows.map((r) => Math.log10(r.mean)), 'log10 b', 'log10 mean');
}

await init();
$('pgo').onclick = guarded('perr', drawProfile);
$('cgo').onclick = guarded('cerr', drawCesaro);
$('sgo').onclick = guarded('serr', drawSemigroup);
$('pgo').onclick();
$('cgo').onclick();
$('sgo').onclick();
