import { ApiError, StudioApi } from "./api";
import type { SketchSet, StoryLinePayload } from "./api";
import { Store } from "./state";

// Matches "sketch #3" in server 400 messages so the offending range bar can
// be highlighted inline.
const SKETCH_INDEX_RE = /sketch #(\d+)/;

export class StudioController {
    constructor(
        private api: StudioApi,
        public store: Store,
        private debounceMs: number = 250,
    ) {}

    private patchTimer: ReturnType<typeof setTimeout> | null = null;

    async loadTopics(): Promise<void> {
        try {
            const topics = await this.api.getTopics();
            this.store.update({ topics, error: null });
        } catch (exc) {
            this.store.update({ error: this.describe(exc, "loading topics") });
        }
    }

    private describe(exc: unknown, doing: string): string {
        if (exc instanceof ApiError) return `${doing} failed: ${exc.message}`;
        return `${doing} failed: ${exc}`;
    }

    private async ensureSession(): Promise<string> {
        const state = this.store.get();
        if (state.sessionId) return state.sessionId;
        const session = await this.api.createSession(state.sketch);
        this.store.update({
            sessionId: session.id,
            revision: session.revision,
            curves: session.curves,
            invalidSketch: null,
        });
        return session.id;
    }

    // Applies a local sketch edit immediately and schedules the PATCH.
    editSketch(mutate: (sketch: SketchSet) => SketchSet): void {
        const sketch = mutate(structuredClone(this.store.get().sketch));
        this.store.update({ sketch });
        if (this.patchTimer !== null) clearTimeout(this.patchTimer);
        this.patchTimer = setTimeout(() => {
            this.patchTimer = null;
            void this.pushSketch();
        }, this.debounceMs);
    }

    async pushSketch(): Promise<void> {
        try {
            const id = await this.ensureSession();
            const session = await this.api.patchSketch(id, this.store.get().sketch);
            this.store.update({
                revision: session.revision,
                curves: session.curves,
                lineRevisions: session.line_revisions,
                error: null,
                invalidSketch: null,
            });
        } catch (exc) {
            const match = exc instanceof ApiError ? SKETCH_INDEX_RE.exec(exc.message) : null;
            this.store.update({
                error: this.describe(exc, "updating sketch"),
                invalidSketch: match ? Number(match[1]) : null,
            });
        }
    }

    async flushSketch(): Promise<void> {
        if (this.patchTimer !== null) {
            clearTimeout(this.patchTimer);
            this.patchTimer = null;
            await this.pushSketch();
        }
    }

    async generate(): Promise<void> {
        this.store.update({ busy: true, error: null });
        try {
            await this.flushSketch();
            const id = await this.ensureSession();
            const lines: StoryLinePayload[] = [];
            this.store.update({ story: lines.slice() });
            const { revision } = await this.api.generateStream(id, (line) => {
                lines.push(line);
                this.store.update({ story: lines.slice() });
            });
            this.store.update({
                revision,
                lineRevisions: lines.map(() => revision),
                busy: false,
            });
        } catch (exc) {
            // keep whatever lines already streamed in; sketch stays editable
            this.store.update({ busy: false, error: this.describe(exc, "generating") });
        }
    }

    async regenerateLine(n: number): Promise<void> {
        const id = this.store.get().sessionId;
        if (id === null) return;
        this.store.update({ busy: true, error: null });
        try {
            const session = await this.api.regenerateLine(id, n);
            this.store.update({
                revision: session.revision,
                curves: session.curves,
                story: session.story ? session.story.lines : null,
                lineRevisions: session.line_revisions,
                busy: false,
            });
        } catch (exc) {
            this.store.update({ busy: false, error: this.describe(exc, `line ${n}`) });
        }
    }

    async refresh(): Promise<void> {
        const id = this.store.get().sessionId;
        if (id === null) return;
        const session = await this.api.getSession(id);
        this.store.update({
            revision: session.revision,
            curves: session.curves,
            story: session.story ? session.story.lines : null,
            lineRevisions: session.line_revisions,
        });
    }
}
