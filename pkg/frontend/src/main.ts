/**
 * Page shell: binds the static index.html controls to a Viewer. Everything
 * here is thin I/O — file reading, download/upload of judgment reports,
 * keyboard escape — with all viewer behavior in viewer.ts.
 */

import { Viewer } from "./viewer.js";

function byId(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`index.html is missing #${id}`);
  return el;
}

async function readFiles(list: FileList): Promise<{ name: string; text: string }[]> {
  const out: { name: string; text: string }[] = [];
  for (const file of Array.from(list)) {
    out.push({ name: file.name, text: await file.text() });
  }
  return out;
}

function init(): void {
  const status = byId("status");
  const banner = byId("banner");
  const viewer = new Viewer({
    textPane: byId("text-pane"),
    dataPane: byId("data-pane"),
    banner,
    status,
    tooltipLayer: document.body,
  });

  const bundleInput = byId("bundle-input") as HTMLInputElement;
  bundleInput.addEventListener("change", () => {
    const files = bundleInput.files;
    if (files === null || files.length === 0) return;
    status.textContent = "loading…";
    void readFiles(files).then((contents) => {
      viewer.loadBundleFromFiles(contents);
      bundleInput.value = ""; // allow re-selecting the same bundle
    });
  });

  const filterSelect = byId("filter-select") as HTMLSelectElement;
  filterSelect.addEventListener("change", () => {
    const value = filterSelect.value;
    if (value === "all" || value === "errors-only" || value === "unjudged") {
      viewer.setFilter(value);
    }
  });

  function transientBanner(message: string): void {
    const note = document.createElement("div");
    note.className = "pv-banner pv-banner--report";
    note.textContent = message;
    banner.appendChild(note);
    setTimeout(() => note.remove(), 6000);
  }

  const exportBtn = byId("export-btn") as HTMLButtonElement;
  exportBtn.addEventListener("click", () => {
    if (viewer.state === null) {
      transientBanner("load a bundle before exporting judgments");
      return;
    }
    const report = viewer.exportReport();
    const blob = new Blob([JSON.stringify(report, null, 2) + "\n"], { type: "application/json" });
    const url = URL.createObjectURL(blob);
    const anchor = document.createElement("a");
    anchor.href = url;
    anchor.download = `${report.bundle_id}.judgments.json`;
    anchor.click();
    URL.revokeObjectURL(url);
  });

  const importInput = byId("import-input") as HTMLInputElement;
  importInput.addEventListener("change", () => {
    const files = importInput.files;
    if (files === null || files.length === 0) return;
    void files[0].text().then((text) => {
      importInput.value = "";
      try {
        viewer.importReport(JSON.parse(text));
      } catch (exc) {
        transientBanner(`import failed: ${(exc as Error).message}`);
      }
    });
  });

  document.addEventListener("keydown", (event) => {
    if (event.key === "Escape") viewer.deselect();
  });
  // A click that lands outside any span and outside the tooltip drops the
  // pinned selection.
  document.addEventListener("click", (event) => {
    const target = event.target as Element | null;
    if (target === null) return;
    if (target.closest(".pv-span") !== null || target.closest(".pv-tooltip") !== null) return;
    viewer.deselect();
  });
}

init();
