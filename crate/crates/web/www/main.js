import init, { jsa_view, purity_vs_gate_width, hom_visibility } from '../pkg/combhom_web.js';

const $ = (id) => document.getElementById(id);
let lastPurity = null;

// piecewise-linear approximation of viridis
const STOPS = [
  [0.0, [68, 1, 84]], [0.25, [59, 82, 139]], [0.5, [33, 145, 140]],
  [0.75, [94, 201, 98]], [1.0, [253, 231, 37]],
];

function colour(x) {
  for (let i = 1; i < STOPS.length; i++) {
    const [x1, c1] = STOPS[i];
    if (x <= x1) {
      const [x0, c0] = STOPS[i - 1];
      const f = (x - x0) / (x1 - x0);
      return c0.map((c, k) => c + f * (c1[k] - c));
    }
  }
  return STOPS[STOPS.length - 1][1];
}

function drawMap(view) {
  const n = view.points;
  const canvas = $('jsa');
  canvas.width = n;
  canvas.height = n;
  const ctx = canvas.getContext('2d');
  const img = ctx.createImageData(n, n);
  const m = view.magnitude();
  for (let j = 0; j < n; j++) {
    // signal detuning increases upwards
    const y = n - 1 - j;
    for (let k = 0; k < n; k++) {
      const [r, g, b] = colour(Math.sqrt(m[j * n + k]));
      const p = 4 * (y * n + k);
      img.data[p] = r;
      img.data[p + 1] = g;
      img.data[p + 2] = b;
      img.data[p + 3] = 255;
    }
  }
  ctx.putImageData(img, 0, 0);
}

function params() {
  return {
    rep: parseFloat($('rep').value),
    sigma: parseFloat($('sigma').value),
    gs: parseFloat($('gs').value),
    gi: parseFloat($('gi').value),
    gated: $('gated').checked,
  };
}

function updateMap() {
  const p = params();
  $('rep-out').textContent = p.rep.toFixed(1);
  $('sigma-out').textContent = p.sigma.toFixed(2);
  $('gs-out').textContent = p.gs;
  $('gi-out').textContent = p.gi;
  $('gs').disabled = $('gi').disabled = !p.gated;
  try {
    const view = jsa_view(p.rep, p.sigma, p.gs, p.gi, p.gated);
    drawMap(view);
    lastPurity = view.purity;
    $('purity').textContent = view.purity.toFixed(4);
    $('survival').textContent = view.survival.toFixed(3);
    $('jsa-error').textContent = '';
    view.free();
  } catch (e) {
    $('jsa-error').textContent = e.message ?? String(e);
  }
}

function drawCurve(widths, purities) {
  const canvas = $('curve');
  const ctx = canvas.getContext('2d');
  const W = canvas.width, H = canvas.height, pad = 45;
  ctx.clearRect(0, 0, W, H);
  const xMax = widths[widths.length - 1];
  const x = (w) => pad + (w / xMax) * (W - 2 * pad);
  const y = (p) => H - pad - p * (H - 2 * pad);
  ctx.strokeStyle = '#999';
  ctx.fillStyle = '#444';
  ctx.font = '12px system-ui';
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, H - pad);
  ctx.lineTo(W - pad, H - pad);
  ctx.stroke();
  for (const p of [0, 0.25, 0.5, 0.75, 1]) {
    ctx.fillText(p.toFixed(2), 5, y(p) + 4);
  }
  for (let w = 0; w <= xMax; w += 200) {
    ctx.fillText(String(w), x(w) - 10, H - pad + 16);
  }
  ctx.fillText('gate width (ps)', W / 2 - 40, H - 8);
  ctx.strokeStyle = '#21918c';
  ctx.lineWidth = 2;
  ctx.beginPath();
  widths.forEach((w, i) => (i === 0 ? ctx.moveTo(x(w), y(purities[i])) : ctx.lineTo(x(w), y(purities[i]))));
  ctx.stroke();
}

function sweep() {
  const p = params();
  const widths = Float64Array.from({ length: 25 }, (_, i) => 32 * (i + 1));
  $('sweep').disabled = true;
  // let the button repaint before the blocking computation
  setTimeout(() => {
    try {
      drawCurve(Array.from(widths), Array.from(purity_vs_gate_width(p.rep, p.sigma, widths)));
    } catch (e) {
      $('jsa-error').textContent = e.message ?? String(e);
    }
    $('sweep').disabled = false;
  }, 0);
}

function updateVisibility() {
  try {
    const v = hom_visibility(
      parseFloat($('v-purity').value),
      parseFloat($('v-zeta').value),
      parseFloat($('v-g1').value),
      parseFloat($('v-g2').value),
    );
    $('vis').textContent = v.toFixed(4);
    $('vis-error').textContent = '';
  } catch (e) {
    $('vis').textContent = '-';
    $('vis-error').textContent = e.message ?? String(e);
  }
}

await init();
for (const id of ['rep', 'sigma', 'gs', 'gi', 'gated']) {
  $(id).addEventListener('input', updateMap);
}
$('sweep').addEventListener('click', sweep);
$('vis-form').addEventListener('input', updateVisibility);
$('use-purity').addEventListener('click', () => {
  if (lastPurity !== null) {
    $('v-purity').value = lastPurity.toFixed(4);
    updateVisibility();
  }
});
updateMap();
updateVisibility();
