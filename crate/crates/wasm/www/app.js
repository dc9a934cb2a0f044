import init, { Demo, chi_squared_table, inject_artifacts } from "./pkg/mtdiag_wasm.js";

const $ = (id) => document.getElementById(id);
let demo = null;
let examples = [];
let next = 0;

function color(intensity) {
  const a = Math.min(1, Math.abs(intensity));
  return intensity >= 0 ? `rgba(220, 40, 40, ${a})` : `rgba(40, 90, 220, ${a})`;
}

function row(label, tokens, max) {
  const div = document.createElement("div");
  div.className = "row";
  const b = document.createElement("b");
  b.textContent = label;
  div.appendChild(b);
  for (const t of tokens) {
    const span = document.createElement("span");
    span.className = "tok" + (t.known ? "" : " oov");
    span.textContent = t.token;
    span.title = t.score.toExponential(3);
    span.style.background = color(max > 0 ? t.score / max : 0);
    div.appendChild(span);
  }
  return div;
}

function explain() {
  const method = document.querySelector("input[name=method]:checked").value;
  const out = JSON.parse(demo.explain($("src").value, $("left").value, $("right").value, method));
  const heat = $("heatmap");
  heat.replaceChildren();
  if (out.error) {
    $("verdict").textContent = out.error;
    return;
  }
  const all = [...out.source, ...out.left, ...out.right];
  const max = Math.max(0, ...all.map((t) => Math.abs(t.score)));
  $("verdict").textContent =
    `machine translation predicted on the ${out.predicted_machine} ` +
    `(logit ${out.logit_machine.toFixed(3)}, softmax ${out.softmax_machine.toFixed(3)})`;
  heat.append(row("source", out.source, max), row("left", out.left, max), row("right", out.right, max));
}

function showExample() {
  if (!examples.length) return;
  const [src, human, machine] = examples[next % examples.length];
  next += 1;
  $("src").value = src;
  $("left").value = human;
  $("right").value = machine;
  explain();
}

function chi() {
  const v = ["a", "b", "c", "d"].map((id) => Math.max(0, parseInt($(id).value, 10) || 0));
  const r = JSON.parse(chi_squared_table(...v));
  $("chi").textContent = r.statistic === null
    ? "not testable: a row or column is empty"
    : `χ² = ${r.statistic.toFixed(3)}, p = ${r.p_value.toExponential(3)}\n` +
      `critical value ${r.critical_value.toFixed(3)} at α = ${r.alpha}: ` +
      (r.significant ? "significant" : "not significant");
}

function inject() {
  const r = JSON.parse(inject_artifacts($("isrc").value, $("ihum").value, $("u").checked, $("m").checked, $("e").checked));
  $("inj").textContent = r.error ? r.error : `${r.machine}\n\nfired: ${r.fired.join(", ") || "none"}`;
}

async function main() {
  await init();
  for (const id of ["a", "b", "c", "d"]) $(id).addEventListener("input", chi);
  for (const id of ["isrc", "ihum", "u", "m", "e"]) $(id).addEventListener("input", inject);
  chi();
  inject();

  $("status").textContent = "training on 3000 synthetic samples…";
  // let the status paint before the synchronous training run
  await new Promise((r) => setTimeout(r, 30));
  const t0 = performance.now();
  demo = new Demo(3000, 7);
  const s = JSON.parse(demo.summary());
  examples = s.examples;
  $("status").textContent =
    `trained in ${((performance.now() - t0) / 1000).toFixed(1)} s: ${s.parameters} parameters, ` +
    `held-out accuracy ${(100 * s.test_accuracy).toFixed(1)}% on ${s.test_samples} pairs`;
  $("explain").disabled = false;
  $("example").disabled = false;
  $("explain").addEventListener("click", explain);
  $("example").addEventListener("click", showExample);
  for (const el of document.querySelectorAll("input[name=method]")) el.addEventListener("change", explain);
  showExample();
}

main().catch((e) => {
  $("status").textContent = `failed to start: ${e}`;
});
