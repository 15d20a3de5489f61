// Typed client for the session API. Every number rendered in the studio
// comes from these payloads; the UI never recomputes planner math itself.

export interface SketchRange {
    code: string;
    start: number;
    end: number;
}

export interface SketchSet {
    n_lines: number;
    sigma: number;
    epsilon: number;
    total_strength: number;
    variance_mode: string;
    sketches: SketchRange[];
}

export interface PlanLine {
    n: number;
    entries: [string, number][];
}

export interface PlanPayload {
    n_lines: number;
    total_strength: number;
    lines: PlanLine[];
    curves: Record<string, number[]>;
}

export interface StoryLinePayload {
    n: number;
    text: string;
    config: { entries: [string, number][]; total_strength: number };
    ppl: number | null;
    used_fallback?: boolean;
    degenerate?: boolean;
}

export interface SessionState {
    id: string;
    revision: number;
    sketch: SketchSet;
    plan: PlanPayload;
    curves: Record<string, number[]>;
    story: { lines: StoryLinePayload[] } | null;
    line_revisions: number[];
}

export class ApiError extends Error {
    constructor(
        public status: number,
        message: string,
    ) {
        super(message);
    }
}

async function parseError(resp: Response): Promise<ApiError> {
    let message = `${resp.status}`;
    try {
        const body = await resp.json();
        if (body && typeof body.error === "string") message = body.error;
    } catch {
        // non-JSON error body; keep the status text
    }
    return new ApiError(resp.status, message);
}

export class StudioApi {
    constructor(private baseUrl: string = "") {}

    private async request<T>(path: string, init?: RequestInit): Promise<T> {
        let resp: Response;
        try {
            resp = await fetch(this.baseUrl + path, init);
        } catch (exc) {
            throw new ApiError(0, `server unreachable: ${exc}`);
        }
        if (!resp.ok) throw await parseError(resp);
        return (await resp.json()) as T;
    }

    async getTopics(): Promise<string[]> {
        const body = await this.request<{ codes: string[] }>("/api/topics");
        return body.codes;
    }

    createSession(sketch: SketchSet): Promise<SessionState> {
        return this.request("/api/session", {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(sketch),
        });
    }

    getSession(id: string): Promise<SessionState> {
        return this.request(`/api/session/${id}`);
    }

    patchSketch(id: string, sketch: SketchSet): Promise<SessionState> {
        return this.request(`/api/session/${id}/sketch`, {
            method: "PATCH",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(sketch),
        });
    }

    generate(id: string): Promise<SessionState> {
        return this.request(`/api/session/${id}/generate`, { method: "POST" });
    }

    // Consumes the NDJSON stream, invoking onLine per story line as it lands.
    async generateStream(
        id: string,
        onLine: (line: StoryLinePayload) => void,
    ): Promise<{ revision: number }> {
        let resp: Response;
        try {
            resp = await fetch(`${this.baseUrl}/api/session/${id}/generate?stream=1`, {
                method: "POST",
            });
        } catch (exc) {
            throw new ApiError(0, `server unreachable: ${exc}`);
        }
        if (!resp.ok) throw await parseError(resp);

        let buffer = "";
        let done: { revision: number } | null = null;
        const handle = (chunk: string) => {
            buffer += chunk;
            for (let nl = buffer.indexOf("\n"); nl >= 0; nl = buffer.indexOf("\n")) {
                const raw = buffer.slice(0, nl).trim();
                buffer = buffer.slice(nl + 1);
                if (!raw) continue;
                const payload = JSON.parse(raw);
                if (payload.error) throw new ApiError(502, payload.error);
                if (payload.done) done = { revision: payload.revision };
                else onLine(payload as StoryLinePayload);
            }
        };

        if (resp.body) {
            const reader = resp.body.getReader();
            const decoder = new TextDecoder();
            for (;;) {
                const { value, done: eof } = await reader.read();
                if (eof) break;
                handle(decoder.decode(value, { stream: true }));
            }
            handle("\n");
        } else {
            handle((await resp.text()) + "\n");
        }
        if (!done) throw new ApiError(502, "stream ended without completion");
        return done;
    }

    regenerateLine(id: string, n: number): Promise<SessionState> {
        return this.request(`/api/session/${id}/line/${n}/regenerate`, { method: "POST" });
    }
}
