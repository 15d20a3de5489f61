import type { SketchSet } from "./api";
import type { StudioState } from "./state";

export interface CanvasCallbacks {
    onEdit(mutate: (sketch: SketchSet) => SketchSet): void;
}

function clamp(value: number, lo: number, hi: number): number {
    return Math.min(hi, Math.max(lo, value));
}

// Draggable per-topic range bars over the story's line axis, plus the sigma
// and total-strength sliders. Handles are keyboard-operable (arrow keys).
export class SketchCanvas {
    readonly root: HTMLDivElement;
    private tracks: HTMLDivElement;
    private controls: HTMLDivElement;
    private addRow: HTMLDivElement;

    constructor(
        parent: HTMLElement,
        private callbacks: CanvasCallbacks,
    ) {
        this.root = document.createElement("div");
        this.root.className = "sketch-canvas";
        this.controls = document.createElement("div");
        this.controls.className = "sketch-controls";
        this.tracks = document.createElement("div");
        this.tracks.className = "sketch-tracks";
        this.addRow = document.createElement("div");
        this.addRow.className = "sketch-add";
        this.root.append(this.controls, this.tracks, this.addRow);
        parent.appendChild(this.root);
    }

    render(state: StudioState): void {
        this.renderControls(state);
        this.renderTracks(state);
        this.renderAddRow(state);
    }

    private slider(
        label: string,
        value: number,
        min: number,
        max: number,
        step: number,
        apply: (sketch: SketchSet, value: number) => void,
    ): HTMLLabelElement {
        const wrap = document.createElement("label");
        wrap.className = "param-slider";
        const caption = document.createElement("span");
        caption.textContent = `${label}: ${value}`;
        const input = document.createElement("input");
        input.type = "range";
        input.min = String(min);
        input.max = String(max);
        input.step = String(step);
        input.value = String(value);
        input.setAttribute("data-param", label);
        input.addEventListener("input", () => {
            const parsed = Number(input.value);
            caption.textContent = `${label}: ${parsed}`;
            this.callbacks.onEdit((sketch) => {
                apply(sketch, parsed);
                return sketch;
            });
        });
        wrap.append(caption, input);
        return wrap;
    }

    private renderControls(state: StudioState): void {
        this.controls.replaceChildren(
            this.slider("sigma", state.sketch.sigma, 0.1, 5, 0.1, (sketch, value) => {
                sketch.sigma = value;
            }),
            this.slider(
                "strength",
                state.sketch.total_strength,
                0,
                4,
                0.1,
                (sketch, value) => {
                    sketch.total_strength = value;
                },
            ),
        );
    }

    private renderTracks(state: StudioState): void {
        const n = state.sketch.n_lines;
        this.tracks.replaceChildren();
        state.sketch.sketches.forEach((range, index) => {
            const row = document.createElement("div");
            row.className = "sketch-row";
            if (state.invalidSketch === index) row.classList.add("invalid");

            const select = document.createElement("select");
            select.setAttribute("aria-label", `topic for sketch ${index}`);
            for (const topic of state.topics) {
                const option = document.createElement("option");
                option.value = topic;
                option.textContent = topic;
                option.selected = topic === range.code;
                select.appendChild(option);
            }
            select.addEventListener("change", () => {
                this.callbacks.onEdit((sketch) => {
                    sketch.sketches[index].code = select.value;
                    return sketch;
                });
            });

            const track = document.createElement("div");
            track.className = "range-track";
            const bar = document.createElement("div");
            bar.className = "range-bar";
            bar.style.left = `${(range.start / n) * 100}%`;
            bar.style.width = `${((range.end - range.start + 1) / n) * 100}%`;
            track.appendChild(bar);
            track.appendChild(this.handle(index, "start", range.start, range, n));
            track.appendChild(this.handle(index, "end", range.end, range, n));

            const remove = document.createElement("button");
            remove.textContent = "x";
            remove.setAttribute("aria-label", `remove sketch ${index}`);
            remove.addEventListener("click", () => {
                this.callbacks.onEdit((sketch) => {
                    sketch.sketches.splice(index, 1);
                    return sketch;
                });
            });

            row.append(select, track, remove);
            this.tracks.appendChild(row);
        });
    }

    // Moving start past end (or vice versa) snaps the pair equal, so the
    // client never emits an invalid range.
    private moveHandle(index: number, which: "start" | "end", line: number, n: number): void {
        this.callbacks.onEdit((sketch) => {
            const range = sketch.sketches[index];
            const value = clamp(line, 0, n - 1);
            if (which === "start") {
                range.start = value;
                if (range.end < value) range.end = value;
            } else {
                range.end = value;
                if (range.start > value) range.start = value;
            }
            return sketch;
        });
    }

    private handle(
        index: number,
        which: "start" | "end",
        line: number,
        range: { start: number; end: number },
        n: number,
    ): HTMLDivElement {
        const el = document.createElement("div");
        el.className = `range-handle ${which}`;
        el.tabIndex = 0;
        el.setAttribute("role", "slider");
        el.setAttribute("aria-label", `sketch ${index} ${which}`);
        el.setAttribute("aria-valuemin", "0");
        el.setAttribute("aria-valuemax", String(n - 1));
        el.setAttribute("aria-valuenow", String(line));
        el.style.left = `${((line + 0.5) / n) * 100}%`;

        el.addEventListener("keydown", (event: KeyboardEvent) => {
            const current = which === "start" ? range.start : range.end;
            if (event.key === "ArrowLeft") {
                event.preventDefault();
                this.moveHandle(index, which, current - 1, n);
            } else if (event.key === "ArrowRight") {
                event.preventDefault();
                this.moveHandle(index, which, current + 1, n);
            }
        });

        el.addEventListener("pointerdown", (event: PointerEvent) => {
            event.preventDefault();
            el.setPointerCapture(event.pointerId);
            const track = el.parentElement as HTMLDivElement;
            const move = (ev: PointerEvent) => {
                const rect = track.getBoundingClientRect();
                if (rect.width === 0) return;
                const fraction = (ev.clientX - rect.left) / rect.width;
                this.moveHandle(index, which, Math.round(fraction * n - 0.5), n);
            };
            const up = () => {
                el.removeEventListener("pointermove", move);
                el.removeEventListener("pointerup", up);
            };
            el.addEventListener("pointermove", move);
            el.addEventListener("pointerup", up);
        });
        return el;
    }

    private renderAddRow(state: StudioState): void {
        this.addRow.replaceChildren();
        const button = document.createElement("button");
        button.textContent = "+ add topic range";
        button.disabled = state.topics.length === 0;
        button.addEventListener("click", () => {
            const topic = state.topics[0];
            const n = state.sketch.n_lines;
            this.callbacks.onEdit((sketch) => {
                sketch.sketches.push({ code: topic, start: 0, end: Math.max(0, n - 1) });
                return sketch;
            });
        });
        this.addRow.appendChild(button);
    }
}
