/** Browser bootstrap: wires the session app to the page in index.html. */

import { ServiceError, SessionClient } from "./api.js";
import { SessionApp, renderSessionList } from "./app.js";

const SERVICE_URL = (window as unknown as { IUTKIT_SERVICE_URL?: string }).IUTKIT_SERVICE_URL ?? "http://127.0.0.1:8000";

async function main(): Promise<void> {
  const client = new SessionClient(SERVICE_URL);
  const app = new SessionApp(client);

  const banner = document.getElementById("banner")!;
  const list = document.getElementById("session-list")!;
  const view = document.getElementById("session-view")!;
  const form = document.getElementById("instruction-form") as HTMLFormElement;
  const input = document.getElementById("instruction") as HTMLInputElement;

  async function refreshList(): Promise<void> {
    try {
      list.innerHTML = await renderSessionList(client);
      banner.hidden = true;
    } catch (error) {
      banner.hidden = false;
      banner.innerHTML = `service unreachable: ${error instanceof ServiceError ? error.message : String(error)} <button id="retry">retry</button>`;
      document.getElementById("retry")?.addEventListener("click", refreshList);
    }
  }

  async function openFromHash(): Promise<void> {
    const sessionId = location.hash.slice(1);
    if (!sessionId) return;
    await app.open(sessionId);
    view.innerHTML = app.render();
  }

  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const instruction = input.value.trim();
    if (!instruction || !app.viewModel) return;
    input.disabled = true;
    try {
      await app.submit(instruction);
      view.innerHTML = app.render();
      input.value = "";
      await refreshList();
    } finally {
      input.disabled = false;
    }
  });

  window.addEventListener("hashchange", openFromHash);
  await refreshList();
  await openFromHash();
  setInterval(refreshList, 10_000); // read polling; never submits
}

main();
