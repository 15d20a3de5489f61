const PALETTE = ["#2f6fde", "#d9822b", "#2f9e44", "#c92a2a", "#862e9c", "#0b7285"];

const WIDTH = 560;
const HEIGHT = 180;
const PAD = 24;

// Per-topic weight curves over line indices, drawn exactly from the arrays
// the server returned with the current plan.
export class CurveChart {
    readonly root: HTMLDivElement;

    constructor(parent: HTMLElement) {
        this.root = document.createElement("div");
        this.root.className = "curve-chart";
        parent.appendChild(this.root);
    }

    render(curves: Record<string, number[]>, nLines: number): void {
        this.root.replaceChildren();
        const codes = Object.keys(curves);
        if (!codes.length || nLines < 1) {
            const empty = document.createElement("p");
            empty.className = "curve-empty";
            empty.textContent = "no plan yet - add a topic range";
            this.root.appendChild(empty);
            return;
        }
        const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
        svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
        svg.setAttribute("role", "img");
        svg.setAttribute("aria-label", "planned topic weight per line");

        const top = Math.max(1e-9, ...codes.map((c) => Math.max(...curves[c])));
        const x = (line: number) =>
            PAD + (nLines === 1 ? 0.5 : line / (nLines - 1)) * (WIDTH - 2 * PAD);
        const y = (weight: number) => HEIGHT - PAD - (weight / top) * (HEIGHT - 2 * PAD);

        const axis = document.createElementNS("http://www.w3.org/2000/svg", "line");
        axis.setAttribute("x1", String(PAD));
        axis.setAttribute("x2", String(WIDTH - PAD));
        axis.setAttribute("y1", String(HEIGHT - PAD));
        axis.setAttribute("y2", String(HEIGHT - PAD));
        axis.setAttribute("class", "axis");
        svg.appendChild(axis);

        for (let line = 0; line < nLines; line++) {
            const tick = document.createElementNS("http://www.w3.org/2000/svg", "text");
            tick.setAttribute("x", String(x(line)));
            tick.setAttribute("y", String(HEIGHT - 6));
            tick.setAttribute("class", "tick");
            tick.textContent = String(line);
            svg.appendChild(tick);
        }

        codes.forEach((code, i) => {
            const points = curves[code]
                .slice(0, nLines)
                .map((w, line) => `${x(line)},${y(w)}`)
                .join(" ");
            const poly = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
            poly.setAttribute("points", points);
            poly.setAttribute("fill", "none");
            poly.setAttribute("stroke", PALETTE[i % PALETTE.length]);
            poly.setAttribute("stroke-width", "2");
            poly.setAttribute("data-code", code);
            svg.appendChild(poly);
        });

        const legend = document.createElement("div");
        legend.className = "curve-legend";
        codes.forEach((code, i) => {
            const item = document.createElement("span");
            item.style.color = PALETTE[i % PALETTE.length];
            item.textContent = code;
            legend.appendChild(item);
        });
        this.root.append(svg, legend);
    }
}
