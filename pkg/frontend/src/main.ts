import { StudioApi } from "./api";
import { StudioController } from "./controller";
import { CurveChart } from "./curves";
import { SketchCanvas } from "./sketch_canvas";
import { Store } from "./state";
import { StoryPanel } from "./story_panel";
import "./style.css";

export function mountStudio(root: HTMLElement, api = new StudioApi()): StudioController {
    const store = new Store();
    const controller = new StudioController(api, store);

    root.classList.add("studio");

    const banner = document.createElement("div");
    banner.className = "error-banner";
    banner.hidden = true;
    const bannerText = document.createElement("span");
    const retry = document.createElement("button");
    retry.textContent = "retry";
    retry.addEventListener("click", () => {
        banner.hidden = true;
        void controller.loadTopics();
    });
    banner.append(bannerText, retry);

    const left = document.createElement("section");
    left.className = "pane sketch-pane";
    const leftTitle = document.createElement("h2");
    leftTitle.textContent = "control sketch";
    left.appendChild(leftTitle);

    const right = document.createElement("section");
    right.className = "pane story-pane";
    const rightTitle = document.createElement("h2");
    rightTitle.textContent = "story";
    right.appendChild(rightTitle);

    const canvas = new SketchCanvas(left, {
        onEdit: (mutate) => controller.editSketch(mutate),
    });
    const chart = new CurveChart(left);

    const generate = document.createElement("button");
    generate.className = "generate";
    generate.textContent = "generate";
    generate.addEventListener("click", () => void controller.generate());
    left.appendChild(generate);

    const panel = new StoryPanel(right, {
        onRegenerate: (n) => void controller.regenerateLine(n),
    });

    root.append(banner, left, right);

    store.subscribe((state) => {
        banner.hidden = state.error === null;
        bannerText.textContent = state.error ?? "";
        generate.disabled = state.busy;
        canvas.render(state);
        chart.render(state.curves, state.sketch.n_lines);
        panel.render(state);
    });

    void controller.loadTopics();
    return controller;
}

const mount = document.getElementById("app");
if (mount) mountStudio(mount);
