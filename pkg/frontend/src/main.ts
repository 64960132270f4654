/** Browser bootstrap: create a session, walk the tasks in order, wire DOM
 * events to the controller. Configuration is limited to the service base
 * URL (?service=… or same origin). */

import { ApiClient } from "./api";
import { renderCondition } from "./render";
import { TaskController } from "./state";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? "";
const api = new ApiClient(baseUrl);

const root = document.getElementById("app")!;
let controller: TaskController | null = null;
let taskIndex = 0;
let taskCount = 0;
let sessionId = "";

function draw(): void {
  if (!controller) return;
  root.innerHTML = renderCondition(controller.state, controller.chipOrder());
}

async function nextTask(): Promise<void> {
  if (taskIndex >= taskCount) {
    root.innerHTML = `<main><h2>All tasks complete.</h2>
      <p>Thank you — your responses were recorded.</p></main>`;
    return;
  }
  controller = new TaskController(api, sessionId, () => performance.now());
  controller.onChange = draw;
  await controller.loadTask(taskIndex);
}

root.addEventListener("click", (ev) => {
  const target = ev.target as HTMLElement;
  if (!controller) return;
  const chip = target.closest<HTMLElement>("[data-hypothesis]");
  if (chip) {
    void controller.toggleHypothesis(Number(chip.dataset.hypothesis));
    return;
  }
  const action = target.closest<HTMLElement>("[data-action]")?.dataset.action;
  if (action === "submit") {
    void controller.submit().then((ok) => {
      if (ok) {
        taskIndex += 1;
        setTimeout(() => void nextTask(), 600);
      }
    });
  } else if (action === "retry") {
    void controller.loadTask(taskIndex);
  } else if (action === "rank") {
    controller.toggleRankedOrdering();
  }
});

root.addEventListener("change", (ev) => {
  const target = ev.target as HTMLInputElement;
  if (!controller) return;
  if (target.dataset.alloc !== undefined) {
    controller.setAllocation(Number(target.dataset.alloc), Number(target.value));
  } else if (target.dataset.action === "confidence") {
    controller.setConfidence(Number(target.value));
  } else if (target.name === "answer") {
    controller.setAnswer(Number(target.value));
  }
});

async function start(): Promise<void> {
  try {
    const session = await api.createSession();
    sessionId = session.id;
    taskCount = session.task_count;
    await nextTask();
  } catch (err) {
    root.innerHTML = `<div class="error">cannot reach the study service: ${String(
      err,
    )} <button onclick="location.reload()">retry</button></div>`;
  }
}

void start();
