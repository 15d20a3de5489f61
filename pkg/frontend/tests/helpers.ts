// In-memory fake of the session API, served through a stubbed fetch. Curves
// are an arbitrary-but-deterministic function of the sketch so tests can
// check that the UI shows exactly what the server said, not a client-side
// recomputation.

import type { PlanPayload, SketchSet, StoryLinePayload } from "../src/api";

interface FakeSession {
    id: string;
    sketch: SketchSet;
    revision: number;
    story: StoryLinePayload[] | null;
    line_revisions: number[];
}

export function fakeCurves(sketch: SketchSet): Record<string, number[]> {
    const curves: Record<string, number[]> = {};
    sketch.sketches.forEach((range, index) => {
        const curve = curves[range.code] ?? new Array(sketch.n_lines).fill(0);
        for (let n = 0; n < sketch.n_lines; n++) {
            if (n >= range.start && n <= range.end) {
                curve[n] += (index + 1) * (1 + n) * sketch.sigma * 0.01;
            }
        }
        curves[range.code] = curve;
    });
    return curves;
}

function planOf(sketch: SketchSet): PlanPayload {
    const curves = fakeCurves(sketch);
    return {
        n_lines: sketch.n_lines,
        total_strength: sketch.total_strength,
        lines: Array.from({ length: sketch.n_lines }, (_, n) => ({
            n,
            entries: Object.keys(curves)
                .filter((code) => curves[code][n] > 0)
                .map((code) => [code, sketch.total_strength] as [string, number]),
        })),
        curves,
    };
}

function lineOf(session: FakeSession, n: number, marker = ""): StoryLinePayload {
    const plan = planOf(session.sketch);
    const entries = plan.lines[n].entries;
    const dominant = entries.length ? entries[0][0] : "neutral";
    return {
        n,
        text: `line ${n} about ${dominant}${marker}`,
        config: { entries, total_strength: session.sketch.total_strength },
        ppl: 10 + n,
    };
}

export class FakeServer {
    topics: string[] = ["Business", "Science", "Sports", "World"];
    sessions = new Map<string, FakeSession>();
    topicsDown = false;
    requests: { method: string; url: string; body: unknown }[] = [];
    private counter = 0;

    state(session: FakeSession) {
        return {
            id: session.id,
            revision: session.revision,
            sketch: session.sketch,
            plan: planOf(session.sketch),
            curves: planOf(session.sketch).curves,
            story: session.story ? { lines: session.story } : null,
            line_revisions: session.line_revisions,
        };
    }

    private json(payload: unknown, status = 200): Response {
        return new Response(JSON.stringify(payload), {
            status,
            headers: { "content-type": "application/json" },
        });
    }

    private validate(sketch: SketchSet): Response | null {
        if (!sketch.n_lines || sketch.n_lines < 1) {
            return this.json({ error: "n_lines must be >= 1" }, 400);
        }
        for (let i = 0; i < sketch.sketches.length; i++) {
            const range = sketch.sketches[i];
            if (range.start > range.end || range.start < 0) {
                return this.json({ error: `request body: sketch #${i}: bad range` }, 400);
            }
        }
        return null;
    }

    fetch = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
        const url = String(input);
        const method = init?.method ?? "GET";
        const body = init?.body ? JSON.parse(String(init.body)) : null;
        this.requests.push({ method, url, body });

        if (url.endsWith("/api/topics")) {
            if (this.topicsDown) return this.json({ error: "guide offline" }, 502);
            return this.json({ codes: this.topics });
        }

        if (method === "POST" && url.endsWith("/api/session")) {
            const invalid = this.validate(body as SketchSet);
            if (invalid) return invalid;
            const session: FakeSession = {
                id: `s${this.counter++}`,
                sketch: body as SketchSet,
                revision: 0,
                story: null,
                line_revisions: [],
            };
            this.sessions.set(session.id, session);
            return this.json(this.state(session));
        }

        const match = url.match(/\/api\/session\/([^/?]+)(.*)$/);
        if (!match) return this.json({ error: `no such route ${url}` }, 404);
        const session = this.sessions.get(match[1]);
        if (!session) return this.json({ error: "unknown session" }, 404);
        const rest = match[2];

        if (method === "PATCH" && rest === "/sketch") {
            const invalid = this.validate(body as SketchSet);
            if (invalid) return invalid;
            session.sketch = body as SketchSet;
            session.revision += 1;
            return this.json(this.state(session));
        }
        if (method === "POST" && rest.startsWith("/generate")) {
            session.revision += 1;
            session.story = Array.from({ length: session.sketch.n_lines }, (_, n) =>
                lineOf(session, n),
            );
            session.line_revisions = session.story.map(() => session.revision);
            if (rest.includes("stream=1")) {
                const lines = session.story
                    .map((line) => JSON.stringify(line))
                    .concat(JSON.stringify({ done: true, revision: session.revision }));
                return new Response(lines.join("\n") + "\n", { status: 200 });
            }
            return this.json(this.state(session));
        }
        const regen = rest.match(/^\/line\/(\d+)\/regenerate$/);
        if (method === "POST" && regen) {
            const n = Number(regen[1]);
            if (!session.story || n >= session.story.length) {
                return this.json({ error: `line ${n} out of range` }, 400);
            }
            session.revision += 1;
            session.story = session.story.map((line, i) =>
                i === n ? lineOf(session, n, ` (rev ${session.revision})`) : line,
            );
            session.line_revisions[n] = session.revision;
            return this.json(this.state(session));
        }
        if (method === "GET" && (rest === "" || rest === "/")) {
            return this.json(this.state(session));
        }
        return this.json({ error: `no such route ${url}` }, 404);
    };
}

export function installFakeServer(): FakeServer {
    const server = new FakeServer();
    globalThis.fetch = server.fetch as typeof fetch;
    return server;
}
