/** Page wiring: render the task grid, track the form, submit, repeat. */

import { ApiClient } from "./api.js";
import {
  FormState,
  MIN_SECONDS,
  buildBody,
  canSubmit,
  emptyForm,
  missingRequirements,
} from "./form.js";
import { gridArea, layoutCloud } from "./grid.js";
import { SLOTS, Slot, TaskPayload } from "./types.js";

const api = new ApiClient("");

interface Session {
  task: TaskPayload;
  form: FormState;
  startedAt: number;
}

let session: Session | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function renderCloud(slot: Slot, task: TaskPayload): HTMLElement {
  const view = task.clouds[slot];
  const cell = document.createElement("div");
  cell.className = "cloud";
  cell.style.gridArea = gridArea(view);
  const label = document.createElement("div");
  label.className = "cloud-label";
  label.textContent = slot;
  cell.appendChild(label);
  const canvas = document.createElement("div");
  canvas.className = "cloud-words";
  cell.appendChild(canvas);
  // canvas size must match the layout box; keep in sync with the stylesheet
  const width = 360;
  const height = 240;
  for (const word of layoutCloud(view.entries, width, height)) {
    const span = document.createElement("span");
    span.textContent = word.term;
    span.style.fontSize = `${word.size.toFixed(1)}px`;
    span.style.left = `${word.x.toFixed(1)}px`;
    span.style.top = `${word.y.toFixed(1)}px`;
    canvas.appendChild(span);
  }
  return cell;
}

function renderTask(task: TaskPayload): void {
  el<HTMLElement>("query-text").textContent =
    `Query ${task.query_id}: ${task.query_text}`;
  const grid = el<HTMLElement>("grid");
  grid.replaceChildren();
  for (const slot of SLOTS) grid.appendChild(renderCloud(slot, task));

  const ranks = el<HTMLElement>("ranks");
  ranks.replaceChildren();
  for (let rank = 0; rank < SLOTS.length; rank += 1) {
    const select = document.createElement("select");
    select.id = `rank-${rank}`;
    const blank = document.createElement("option");
    blank.value = "";
    blank.textContent = `rank ${rank + 1}`;
    select.appendChild(blank);
    for (const slot of SLOTS) {
      const option = document.createElement("option");
      option.value = slot;
      option.textContent = slot;
      select.appendChild(option);
    }
    select.addEventListener("change", () => {
      if (!session) return;
      session.form.ranking[rank] = (select.value || null) as Slot | null;
      refreshGate();
    });
    ranks.appendChild(select);
  }
}

function readForm(): void {
  if (!session) return;
  session.form.understood = el<HTMLInputElement>("understood").checked;
  session.form.salientTerms = [
    el<HTMLInputElement>("term-0").value,
    el<HTMLInputElement>("term-1").value,
  ];
  session.form.elapsedSeconds = (Date.now() - session.startedAt) / 1000;
}

function refreshGate(): void {
  if (!session) return;
  readForm();
  const missing = missingRequirements(session.form);
  el<HTMLButtonElement>("submit").disabled = missing.length > 0;
  el<HTMLElement>("requirements").textContent = missing.join("; ");
}

async function loadNext(): Promise<void> {
  const userId = el<HTMLInputElement>("user-id").value.trim();
  if (!userId) return;
  const task = await api.nextTask(userId);
  const status = el<HTMLElement>("status");
  if (!task) {
    session = null;
    el<HTMLElement>("task-panel").hidden = true;
    status.textContent = "No tasks left for you. Thank you!";
    return;
  }
  session = { task, form: emptyForm(), startedAt: Date.now() };
  el<HTMLElement>("task-panel").hidden = false;
  status.textContent = "";
  el<HTMLInputElement>("understood").checked = false;
  el<HTMLInputElement>("term-0").value = "";
  el<HTMLInputElement>("term-1").value = "";
  el<HTMLTextAreaElement>("comment").value = "";
  renderTask(task);
  refreshGate();
}

async function submit(): Promise<void> {
  if (!session) return;
  readForm();
  if (!canSubmit(session.form)) return;
  const userId = el<HTMLInputElement>("user-id").value.trim();
  const comment = el<HTMLTextAreaElement>("comment").value;
  const reply = await api.submit(
    buildBody(session.task.task_id, userId, session.form, comment),
  );
  const status = el<HTMLElement>("status");
  status.textContent = reply.valid
    ? "Response recorded."
    : `Response recorded but not counted: ${reply.reasons.join(", ")}`;
  await loadNext();
}

export function start(): void {
  el<HTMLButtonElement>("begin").addEventListener("click", () => {
    void loadNext();
  });
  el<HTMLButtonElement>("submit").addEventListener("click", () => {
    void submit();
  });
  for (const id of ["understood", "term-0", "term-1"]) {
    el<HTMLElement>(id).addEventListener("input", refreshGate);
  }
  // the 20s gate opens without further interaction; poll the clock
  window.setInterval(refreshGate, 1000);
  el<HTMLElement>("min-seconds").textContent = String(MIN_SECONDS);
}

start();
