// Component tests for the studio round-trip acceptance criteria: curves on
// screen are exactly the server's plan arrays, single-line regeneration
// leaves other rendered lines untouched, topics come only from /api/topics,
// and a provider outage is recoverable without losing sketch state.

import { beforeEach, describe, expect, it } from "vitest";

import { StudioApi } from "../src/api";
import { StudioController } from "../src/controller";
import { CurveChart } from "../src/curves";
import { SketchCanvas } from "../src/sketch_canvas";
import { Store } from "../src/state";
import { StoryPanel } from "../src/story_panel";
import { installFakeServer, type FakeServer } from "./helpers";

function makeController(server: FakeServer): StudioController {
    return new StudioController(new StudioApi(), new Store(), 0);
}

async function withSketch(controller: StudioController): Promise<void> {
    controller.editSketch((sketch) => {
        sketch.sketches.push({ code: "Sports", start: 0, end: 5 });
        return sketch;
    });
    controller.editSketch((sketch) => {
        sketch.sketches.push({ code: "Science", start: 4, end: 9 });
        return sketch;
    });
    await controller.flushSketch();
}

describe("studio round trip", () => {
    let server: FakeServer;
    let controller: StudioController;

    beforeEach(() => {
        server = installFakeServer();
        controller = makeController(server);
    });

    it("editing a range yields exactly the server plan's weight curves", async () => {
        await withSketch(controller);
        controller.editSketch((sketch) => {
            sketch.sketches[1].start = 6;
            return sketch;
        });
        await controller.flushSketch();

        const state = controller.store.get();
        const serverState = await new StudioApi().getSession(state.sessionId!);
        expect(state.curves).toEqual(serverState.plan.curves);

        // and the rendered chart draws one polyline per server curve
        const host = document.createElement("div");
        const chart = new CurveChart(host);
        chart.render(state.curves, state.sketch.n_lines);
        const polylines = host.querySelectorAll("polyline");
        expect(polylines.length).toBe(Object.keys(serverState.plan.curves).length);
        for (const poly of polylines) {
            const code = poly.getAttribute("data-code")!;
            expect(serverState.plan.curves[code]).toBeDefined();
        }
    });

    it("regenerating one line leaves all other rendered lines unchanged", async () => {
        await withSketch(controller);
        await controller.generate();

        const host = document.createElement("div");
        const panel = new StoryPanel(host, {
            onRegenerate: (n) => void controller.regenerateLine(n),
        });
        controller.store.subscribe((state) => panel.render(state));
        panel.render(controller.store.get());

        const before = [...host.querySelectorAll(".line-text")].map((el) => el.textContent);
        expect(before).toHaveLength(10);

        await controller.regenerateLine(3);
        const after = [...host.querySelectorAll(".line-text")].map((el) => el.textContent);
        expect(after[3]).not.toBe(before[3]);
        for (let n = 0; n < 10; n++) {
            if (n !== 3) expect(after[n]).toBe(before[n]);
        }
    });

    it("stale markers appear after a sketch edit and clear on regeneration", async () => {
        await withSketch(controller);
        await controller.generate();
        controller.editSketch((sketch) => {
            sketch.sigma = 2.5;
            return sketch;
        });
        await controller.flushSketch();

        const host = document.createElement("div");
        const panel = new StoryPanel(host, { onRegenerate: () => {} });
        panel.render(controller.store.get());
        expect(host.querySelectorAll(".story-line.stale")).toHaveLength(10);

        await controller.regenerateLine(0);
        panel.render(controller.store.get());
        const rows = host.querySelectorAll(".story-line");
        expect(rows[0].classList.contains("stale")).toBe(false);
        expect(host.querySelectorAll(".story-line.stale")).toHaveLength(9);
    });

    it("mid-stream failure keeps the partial story and stays editable", async () => {
        await withSketch(controller);
        const realFetch = server.fetch;
        globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
            const url = String(input);
            if (url.includes("stream=1")) {
                const lines = [
                    JSON.stringify({
                        n: 0,
                        text: "line 0",
                        config: { entries: [], total_strength: 0 },
                        ppl: null,
                    }),
                    JSON.stringify({ error: "provider failed at line 1" }),
                ];
                return new Response(lines.join("\n") + "\n", { status: 200 });
            }
            return realFetch(input, init);
        }) as typeof fetch;

        await controller.generate();
        const state = controller.store.get();
        expect(state.error).toContain("provider failed");
        expect(state.story).toHaveLength(1);
        expect(state.busy).toBe(false);

        globalThis.fetch = realFetch as typeof fetch;
        await controller.pushSketch();
        expect(controller.store.get().error).toBeNull();
    });

    it("400 responses mark the offending sketch for inline display", async () => {
        await withSketch(controller);
        // bypass the canvas snapping to simulate a hand-crafted bad request
        controller.editSketch((sketch) => {
            sketch.sketches[1] = { code: "Science", start: 8, end: 2 };
            return sketch;
        });
        await controller.flushSketch();
        expect(controller.store.get().invalidSketch).toBe(1);
        expect(controller.store.get().error).toContain("sketch #1");
    });
});

describe("topic list and outage recovery", () => {
    let server: FakeServer;
    let controller: StudioController;

    beforeEach(() => {
        server = installFakeServer();
        controller = makeController(server);
    });

    it("renders exactly the codes served by /api/topics", async () => {
        server.topics = ["Alpha", "Beta"];
        await controller.loadTopics();
        controller.editSketch((sketch) => {
            sketch.sketches.push({ code: "Alpha", start: 0, end: 2 });
            return sketch;
        });

        const host = document.createElement("div");
        const canvas = new SketchCanvas(host, {
            onEdit: (mutate) => controller.editSketch(mutate),
        });
        canvas.render(controller.store.get());
        const options = [...host.querySelectorAll("select option")].map(
            (el) => el.textContent,
        );
        expect(options).toEqual(["Alpha", "Beta"]);
    });

    it("provider outage shows a recoverable error and keeps sketch state", async () => {
        controller.editSketch((sketch) => {
            sketch.sketches.push({ code: "Sports", start: 2, end: 7 });
            sketch.sigma = 3.0;
            return sketch;
        });
        const sketchBefore = structuredClone(controller.store.get().sketch);

        server.topicsDown = true;
        await controller.loadTopics();
        let state = controller.store.get();
        expect(state.error).toContain("guide offline");
        expect(state.sketch).toEqual(sketchBefore);

        server.topicsDown = false;
        await controller.loadTopics();
        state = controller.store.get();
        expect(state.error).toBeNull();
        expect(state.topics).toEqual(["Business", "Science", "Sports", "World"]);
        expect(state.sketch).toEqual(sketchBefore);
    });
});
