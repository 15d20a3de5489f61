import type { SketchSet, StoryLinePayload } from "./api";

export interface StudioState {
    topics: string[];
    sketch: SketchSet;
    sessionId: string | null;
    revision: number;
    curves: Record<string, number[]>;
    story: StoryLinePayload[] | null;
    lineRevisions: number[];
    busy: boolean;
    error: string | null;
    // index of the sketch a 400 complained about, for inline highlighting
    invalidSketch: number | null;
}

export function defaultSketch(): SketchSet {
    return {
        n_lines: 10,
        sigma: 1.0,
        epsilon: 0.001,
        total_strength: 2.0,
        variance_mode: "literal",
        sketches: [],
    };
}

export function initialState(): StudioState {
    return {
        topics: [],
        sketch: defaultSketch(),
        sessionId: null,
        revision: 0,
        curves: {},
        story: null,
        lineRevisions: [],
        busy: false,
        error: null,
        invalidSketch: null,
    };
}

export function staleLines(state: StudioState): boolean[] {
    if (!state.story) return [];
    return state.story.map((_, n) => (state.lineRevisions[n] ?? 0) < state.revision);
}

export type Listener = (state: StudioState) => void;

export class Store {
    private state: StudioState = initialState();
    private listeners: Listener[] = [];

    get(): StudioState {
        return this.state;
    }

    subscribe(listener: Listener): () => void {
        this.listeners.push(listener);
        return () => {
            this.listeners = this.listeners.filter((l) => l !== listener);
        };
    }

    update(partial: Partial<StudioState>): void {
        this.state = { ...this.state, ...partial };
        for (const listener of this.listeners) listener(this.state);
    }
}
