import init, { markup_view, partial_match, DemoTagger } from "./pkg/hiliter_wasm.js";

const $ = (id) => document.getElementById(id);
let tagger = null;
let current = { draft: "", suggestions: [] };

function showMarkup() {
  const view = JSON.parse(markup_view($("markup").value));
  $("markup-html").innerHTML = view.html.replace(/\n/g, "<br>");
  $("markup-json").textContent = JSON.stringify({ spans: view.spans, sentences: view.sentences }, null, 2);
}

function showScore() {
  try {
    const r = JSON.parse(partial_match($("gold").value, $("pred").value));
    const fmt = (m) => (m.undefined ? "undefined" : m.value.toFixed(4));
    $("score").textContent =
      `correct ${r.counts.correct}, predicted ${r.counts.predicted}, gold ${r.counts.gold}\n` +
      `P ${fmt(r.precision)}  R ${fmt(r.recall)}  F1 ${fmt(r.f1)}`;
    $("score").className = "";
  } catch (e) {
    $("score").textContent = String(e);
    $("score").className = "err";
  }
}

function accepted() {
  return current.suggestions.filter((s) => $(`acc-${s.id}`).checked).map((s) => s.id);
}

function rerender() {
  $("rendered").textContent = tagger.render(current.draft, JSON.stringify(accepted()));
}

function suggest() {
  const draft = $("draft").value;
  const out = JSON.parse(tagger.suggest(draft));
  current = { draft, suggestions: out.suggestions };
  const box = $("suggestions");
  box.replaceChildren();
  for (const s of out.suggestions) {
    const row = document.createElement("label");
    row.className = "sugg";
    row.innerHTML =
      `<input type="checkbox" id="acc-${s.id}"> <b>${s.format}</b> ` +
      `<code></code> <span class="conf">${(100 * s.confidence).toFixed(1)}% · chars ${s.char_start}–${s.char_end}</span>`;
    row.querySelector("code").textContent = s.content;
    row.querySelector("input").addEventListener("change", rerender);
    box.append(row);
  }
  if (!out.suggestions.length) box.textContent = "No suggestions.";
  rerender();
}

async function main() {
  await init();
  $("markup").addEventListener("input", showMarkup);
  $("gold").addEventListener("input", showScore);
  $("pred").addEventListener("input", showScore);
  showMarkup();
  showScore();
  $("status").textContent = "Training demo tagger…";
  setTimeout(() => {
    tagger = new DemoTagger(42);
    $("status").textContent = "Ready.";
    $("suggest").addEventListener("click", suggest);
  }, 0);
  $("model-file").addEventListener("change", async (ev) => {
    const file = ev.target.files[0];
    if (!file) return;
    try {
      tagger = DemoTagger.from_model_bytes(new Uint8Array(await file.arrayBuffer()));
      $("status").textContent = `Loaded ${file.name}.`;
    } catch (e) {
      $("status").textContent = String(e);
    }
  });
}

main();
