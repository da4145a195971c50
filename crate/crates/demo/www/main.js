import init, { Demo } from "./pkg/planewarp_demo.js";

const $ = (id) => document.getElementById(id);

function blit(canvas, pixels) {
  const ctx = canvas.getContext("2d");
  const img = new ImageData(new Uint8ClampedArray(pixels), canvas.width, canvas.height);
  ctx.putImageData(img, 0, 0);
}

function timed(label, f) {
  const t0 = performance.now();
  const out = f();
  $("status").textContent = `${label}: ${(performance.now() - t0).toFixed(0)} ms`;
  return out;
}

await init();
const demo = new Demo(7n);

function orbit() {
  const c = $("orbit");
  blit(c, timed("render", () => demo.render(Number($("pose").value), Number($("az").value), Number($("el").value), c.width)));
}

function slice() {
  const c = $("slice");
  try {
    blit(c, timed("warp", () => demo.warp_slice($("method").value, c.width, Number($("grid").value))));
  } catch (e) {
    $("status").textContent = String(e);
  }
}

function measure() {
  const rows = ["sf", "skin", "mvc-grid", "mvc"].map((m) => {
    const err = demo.surface_error(m, 500, Number($("grid").value));
    return `<tr><td>${m}</td><td>${err.toExponential(3)}</td></tr>`;
  });
  $("errors").innerHTML = "<tr><th>method</th><th>max error</th></tr>" + rows.join("");
}

for (const id of ["az", "el", "pose"]) $(id).addEventListener("input", orbit);
for (const id of ["method", "grid"]) $(id).addEventListener("change", slice);
$("measure").addEventListener("click", () => timed("measure", measure));
orbit();
slice();
