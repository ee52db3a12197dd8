// Tab shell: the four dashboard sections share one selected run.

import { renderAlgorithm, renderGraph, renderReport, renderTraffic } from "./views.js";

type TabId = "traffic" | "algorithm" | "report" | "graph";

const TABS: [TabId, string][] = [
  ["traffic", "Traffic Data"],
  ["algorithm", "Clustering Algorithm"],
  ["report", "Report"],
  ["graph", "Graph Data"],
];

let selectedRun: string | null = null;

async function showTab(tab: TabId): Promise<void> {
  document.querySelectorAll("nav button").forEach((b) => {
    b.classList.toggle("active", (b as HTMLElement).dataset.tab === tab);
  });
  const panel = document.getElementById("panel")!;
  try {
    if (tab === "traffic") await renderTraffic(panel);
    else if (tab === "algorithm")
      await renderAlgorithm(panel, { onRunChosen: (id) => (selectedRun = id) });
    else if (tab === "report") await renderReport(panel, selectedRun);
    else await renderGraph(panel, selectedRun);
  } catch (e) {
    panel.innerHTML = `<p class="error">${String(e)}</p>`;
  }
}

function boot(): void {
  const nav = document.getElementById("tabs")!;
  for (const [id, label] of TABS) {
    const btn = document.createElement("button");
    btn.textContent = label;
    btn.dataset.tab = id;
    btn.addEventListener("click", () => void showTab(id));
    nav.appendChild(btn);
  }
  void showTab("traffic");
}

boot();
