import type { StoryLinePayload } from "./api";
import { staleLines, type StudioState } from "./state";

export interface StoryCallbacks {
    onRegenerate(n: number): void;
}

// Generated lines with their topic-weight chips, a per-line regenerate
// button, and stale markers for lines older than the session revision.
export class StoryPanel {
    readonly root: HTMLDivElement;

    constructor(
        parent: HTMLElement,
        private callbacks: StoryCallbacks,
    ) {
        this.root = document.createElement("div");
        this.root.className = "story-panel";
        parent.appendChild(this.root);
    }

    private chips(line: StoryLinePayload): HTMLSpanElement[] {
        return line.config.entries.map(([code, weight]) => {
            const chip = document.createElement("span");
            chip.className = "weight-chip";
            chip.textContent = `${code} ${weight.toFixed(2)}`;
            return chip;
        });
    }

    render(state: StudioState): void {
        this.root.replaceChildren();
        if (!state.story) {
            const hint = document.createElement("p");
            hint.className = "story-empty";
            hint.textContent = "no story yet - press generate";
            this.root.appendChild(hint);
            return;
        }
        const stale = staleLines(state);
        state.story.forEach((line, n) => {
            const row = document.createElement("div");
            row.className = "story-line";
            if (stale[n]) row.classList.add("stale");

            const head = document.createElement("div");
            head.className = "story-line-head";
            const num = document.createElement("span");
            num.className = "line-number";
            num.textContent = String(n);
            head.appendChild(num);
            for (const chip of this.chips(line)) head.appendChild(chip);
            if (stale[n]) {
                const marker = document.createElement("span");
                marker.className = "stale-marker";
                marker.textContent = "stale";
                head.appendChild(marker);
            }
            const regen = document.createElement("button");
            regen.className = "regen";
            regen.textContent = "regenerate";
            regen.disabled = state.busy;
            regen.setAttribute("aria-label", `regenerate line ${n}`);
            regen.addEventListener("click", () => this.callbacks.onRegenerate(n));
            head.appendChild(regen);

            const text = document.createElement("p");
            text.className = "line-text";
            text.textContent = line.text || "(empty line)";

            row.append(head, text);
            this.root.appendChild(row);
        });
    }
}
