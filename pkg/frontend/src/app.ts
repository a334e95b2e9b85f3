/** Browser entry point: wires DOM events to the pure session operations and
 * re-renders the whole view from state after every change. At most one
 * suggestion request is in flight; clicks during a pending request queue one
 * refresh behind it. */

import { ApiClient } from "./client.js";
import { renderSession } from "./render.js";
import {
  acceptSuggestion,
  exportSession,
  fetchSuggestions,
  importSession,
  newSession,
  selectAttribute,
  writeSentence,
} from "./session.js";
import type { SessionState } from "./session.js";

export function mount(root: HTMLElement, endpoint: string): void {
  let state: SessionState = newSession(endpoint);
  const client = new ApiClient(endpoint);
  let inFlight = false;
  let queued = false;

  const view = document.createElement("div");
  const input = document.createElement("input");
  input.placeholder = "write the next sentence…";
  const writeBtn = document.createElement("button");
  writeBtn.textContent = "add sentence";
  const attrSelect = document.createElement("select");
  const suggestBtn = document.createElement("button");
  suggestBtn.textContent = "suggest";
  const exportBtn = document.createElement("button");
  exportBtn.textContent = "export session";
  const importInput = document.createElement("input");
  importInput.type = "file";
  root.append(input, writeBtn, attrSelect, suggestBtn, exportBtn, importInput, view);

  const rerender = () => {
    view.innerHTML = renderSession(state);
    for (const el of view.querySelectorAll<HTMLElement>(".card")) {
      el.addEventListener("click", () => {
        state = acceptSuggestion(state, Number(el.dataset.index));
        rerender();
      });
    }
  };

  const refresh = async () => {
    if (inFlight) {
      queued = true;
      return;
    }
    inFlight = true;
    state = await fetchSuggestions(state, client, 3);
    inFlight = false;
    rerender();
    if (queued) {
      queued = false;
      void refresh();
    }
  };

  client
    .attributes()
    .then((attrs) => {
      const options = attrs.values.length ? attrs.values : [attrs.attribute];
      for (const v of options) {
        const opt = document.createElement("option");
        opt.value = v;
        opt.textContent = v;
        attrSelect.append(opt);
      }
      for (const [mode, available] of Object.entries(attrs.auto_modes)) {
        if (available) {
          const opt = document.createElement("option");
          opt.value = mode;
          opt.textContent = mode;
          attrSelect.append(opt);
        }
      }
      state = selectAttribute(state, {
        attribute: attrs.attribute,
        value: options[0],
      });
    })
    .catch((err) => {
      state = { ...state, error: String(err) };
      rerender();
    });

  writeBtn.addEventListener("click", () => {
    state = writeSentence(state, input.value);
    input.value = "";
    rerender();
  });
  attrSelect.addEventListener("change", () => {
    state = selectAttribute(state, {
      ...state.attributeSpec,
      value: attrSelect.value,
    });
  });
  suggestBtn.addEventListener("click", () => void refresh());
  exportBtn.addEventListener("click", () => {
    const blob = new Blob([exportSession(state)], { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "session.json";
    a.click();
    URL.revokeObjectURL(a.href);
  });
  importInput.addEventListener("change", async () => {
    const file = importInput.files?.[0];
    if (!file) return;
    try {
      state = importSession(await file.text());
    } catch (err) {
      state = { ...state, error: String(err) };
    }
    rerender();
  });

  rerender();
}
