import { HttpApi } from "./api.js";
import { detailView, headerView, queueView, Store } from "./state.js";

// Served by the review service itself (same origin) unless ?api= points at
// another host, which is handy during development.
const base = new URLSearchParams(location.search).get("api") ?? "";
const store = new Store(new HttpApi(base));

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node;
}

function renderHeader(): void {
  const h = headerView(store.getState());
  byId("tau").textContent = h.tau;
  byId("coverage").textContent = h.coverage;
  byId("covered-count").textContent = `${h.nCovered} / ${h.n}`;
  byId("accuracy").textContent = h.selectiveAccuracy;
  byId("budget").textContent = h.budgetRemaining;
  byId("used").textContent = h.confirmationsUsed;
  byId("revision").textContent = h.revision;
  const cov = Number(h.coverage);
  (byId("coverage-bar") as HTMLElement).style.width = Number.isFinite(cov)
    ? `${Math.max(0, Math.min(1, cov)) * 100}%`
    : "0";
}

function renderBanner(): void {
  const banner = store.getState().banner;
  const node = byId("banner");
  node.textContent = banner === null ? "" : banner.text;
  node.className = banner === null ? "banner hidden" : `banner ${banner.kind}`;
}

function renderQueue(): void {
  const rows = queueView(store.getState());
  const list = byId("queue");
  list.replaceChildren();
  byId("queue-count").textContent = String(rows.length);
  for (const row of rows) {
    const item = el("li", "queue-row");
    const head = el("div", "queue-head");
    const idBtn = el("button", "link", row.id);
    idBtn.addEventListener("click", () => void store.open(row.id));
    head.append(idBtn, el("span", "ybar", `score ${row.ybar}`));
    item.append(head);
    const flags = el("div", "flags");
    for (const f of row.flags) {
      flags.append(el("span", "flag", `${f.name} (gain ${f.gain})`));
    }
    item.append(flags);
    list.append(item);
  }
}

function renderDetail(): void {
  const view = detailView(store.getState());
  const panel = byId("detail");
  panel.replaceChildren();
  if (view === null) {
    panel.append(el("p", "hint", "pick an instance from the queue"));
    return;
  }
  panel.append(el("h2", undefined, view.id));
  const status = view.covered
    ? `covered, prediction ${view.decision}`
    : "abstained";
  panel.append(el("p", "status", `score ${view.ybar}; ${status}`));
  const table = el("table", "concepts");
  const head = el("tr");
  for (const col of ["concept", "value", "gain", "cost", ""]) {
    head.append(el("th", undefined, col));
  }
  table.append(head);
  for (const row of view.rows) {
    const tr = el("tr", row.locked ? "locked" : undefined);
    tr.append(el("td", undefined, row.name));
    tr.append(el("td", undefined, row.locked ? `${row.value} (confirmed)` : row.value));
    tr.append(el("td", undefined, row.gain));
    tr.append(el("td", undefined, row.cost));
    const actions = el("td", "actions");
    for (const value of [1, 0] as const) {
      const btn = el("button", undefined, value === 1 ? "present" : "absent");
      btn.disabled = row.disabled;
      btn.addEventListener("click", () => {
        void store.submit(row.concept, value);
      });
      actions.append(btn);
    }
    tr.append(actions);
    table.append(tr);
  }
  panel.append(table);
}

function render(): void {
  renderHeader();
  renderBanner();
  renderQueue();
  renderDetail();
}

store.subscribe(render);
byId("refresh").addEventListener("click", () => void store.refresh());
void store.init();
