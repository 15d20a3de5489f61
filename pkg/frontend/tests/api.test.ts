import { beforeEach, describe, expect, it } from "vitest";

import { ApiError, StudioApi } from "../src/api";
import type { SketchSet } from "../src/api";
import { installFakeServer, type FakeServer } from "./helpers";

const SKETCH: SketchSet = {
    n_lines: 6,
    sigma: 1,
    epsilon: 0.001,
    total_strength: 2,
    variance_mode: "literal",
    sketches: [{ code: "Sports", start: 0, end: 3 }],
};

describe("StudioApi", () => {
    let server: FakeServer;
    let api: StudioApi;

    beforeEach(() => {
        server = installFakeServer();
        api = new StudioApi();
    });

    it("fetches topics", async () => {
        expect(await api.getTopics()).toEqual(["Business", "Science", "Sports", "World"]);
    });

    it("surfaces server errors with status and message", async () => {
        server.topicsDown = true;
        const err = await api.getTopics().catch((e) => e);
        expect(err).toBeInstanceOf(ApiError);
        expect(err.status).toBe(502);
        expect(err.message).toContain("guide offline");
    });

    it("creates sessions and round-trips state", async () => {
        const created = await api.createSession(SKETCH);
        expect(created.revision).toBe(0);
        expect(Object.keys(created.curves)).toEqual(["Sports"]);
        const fetched = await api.getSession(created.id);
        expect(fetched.curves).toEqual(created.curves);
    });

    it("rejects invalid sketches with 400", async () => {
        const bad = { ...SKETCH, sketches: [{ code: "Sports", start: 5, end: 1 }] };
        const err = await api.createSession(bad).catch((e) => e);
        expect(err.status).toBe(400);
        expect(err.message).toContain("sketch #0");
    });

    it("streams story lines then the completion record", async () => {
        const session = await api.createSession(SKETCH);
        const seen: number[] = [];
        const done = await api.generateStream(session.id, (line) => seen.push(line.n));
        expect(seen).toEqual([0, 1, 2, 3, 4, 5]);
        expect(done.revision).toBe(1);
    });
});
