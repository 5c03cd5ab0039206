import { ApiError, CurationApi } from "./api.js";
import { renderDashboard } from "./dashboard.js";
import { CanvasSession } from "./session.js";
import { LESIONS, LESION_COLORS, type ImageEntry, type Lesion } from "./types.js";

const MAX_ZOOM = 16;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

/** PNG bytes -> 0/1 grid via an offscreen canvas (threshold >127). */
async function decodePngBrowser(png: ArrayBuffer, width: number, height: number): Promise<Uint8Array> {
  const bitmap = await createImageBitmap(new Blob([png], { type: "image/png" }));
  const canvas = document.createElement("canvas");
  canvas.width = width;
  canvas.height = height;
  const ctx = canvas.getContext("2d")!;
  ctx.drawImage(bitmap, 0, 0);
  const data = ctx.getImageData(0, 0, width, height).data;
  const grid = new Uint8Array(width * height);
  for (let i = 0; i < grid.length; i++) grid[i] = data[i * 4] > 127 ? 1 : 0;
  return grid;
}

function hexToRgb(hex: string): [number, number, number] {
  const v = parseInt(hex.slice(1), 16);
  return [(v >> 16) & 255, (v >> 8) & 255, v & 255];
}

class AnnotatorApp {
  private api: CurationApi;
  private session: CanvasSession | null = null;
  private images: ImageEntry[] = [];
  private annotator = "";
  private zoom = 4;
  private brushRadius = 2;
  private erasing = false;
  private drawing = false;
  private strokePoints: { x: number; y: number }[] = [];

  private base = el<HTMLCanvasElement>("base-canvas");
  private overlay = el<HTMLCanvasElement>("overlay-canvas");
  private status = el<HTMLElement>("status");

  constructor(baseUrl: string) {
    this.api = new CurationApi(baseUrl);
  }

  async start(): Promise<void> {
    this.annotator = (el<HTMLInputElement>("annotator-id").value || "anonymous").trim();
    const expertise = parseFloat(el<HTMLInputElement>("expertise").value || "0.5");
    try {
      await this.api.registerAnnotator({ annotator_id: this.annotator, expertise });
    } catch (err) {
      this.report(err);
      return;
    }
    this.images = await this.api.listImages();
    const picker = el<HTMLSelectElement>("image-picker");
    picker.innerHTML = this.images
      .map((image) => `<option value="${image.id}">${image.id} (${image.quality ?? "unrated"})</option>`)
      .join("");
    picker.onchange = () => void this.open(picker.value);
    this.bindToolbar();
    if (this.images.length) await this.open(this.images[0].id);
  }

  private bindToolbar(): void {
    for (const lesion of LESIONS) {
      const button = el<HTMLButtonElement>(`layer-${lesion}`);
      button.style.borderColor = LESION_COLORS[lesion];
      button.onclick = () => {
        if (!this.session) return;
        this.session.activeLesion = lesion;
        this.refreshToolbar();
      };
      el<HTMLInputElement>(`visible-${lesion}`).onchange = (event) => {
        if (!this.session) return;
        this.session.layers[lesion].visible = (event.target as HTMLInputElement).checked;
        this.draw();
      };
      el<HTMLInputElement>(`confidence-${lesion}`).oninput = (event) => {
        if (!this.session) return;
        this.session.layers[lesion].confidence = parseFloat((event.target as HTMLInputElement).value);
        this.refreshToolbar();
      };
    }
    el<HTMLInputElement>("brush-size").oninput = (event) => {
      this.brushRadius = parseInt((event.target as HTMLInputElement).value, 10);
    };
    el<HTMLInputElement>("zoom").oninput = (event) => {
      this.zoom = Math.min(MAX_ZOOM, Math.max(1, parseInt((event.target as HTMLInputElement).value, 10)));
      this.applyZoom();
    };
    el<HTMLInputElement>("erase-mode").onchange = (event) => {
      this.erasing = (event.target as HTMLInputElement).checked;
    };
    el<HTMLButtonElement>("undo").onclick = () => {
      this.session?.activeLayer.undo();
      this.draw();
    };
    el<HTMLButtonElement>("redo").onclick = () => {
      this.session?.activeLayer.redo();
      this.draw();
    };
    el<HTMLButtonElement>("submit").onclick = () => void this.submit();
    el<HTMLButtonElement>("show-agreement").onclick = () => void this.showAgreement();
    this.overlay.onpointerdown = (event) => this.strokeStart(event);
    this.overlay.onpointermove = (event) => this.strokeMove(event);
    this.overlay.onpointerup = () => this.strokeEnd();
    this.overlay.onpointerleave = () => this.strokeEnd();
  }

  private async open(imageId: string): Promise<void> {
    const entry = this.images.find((image) => image.id === imageId);
    if (!entry) return;
    this.session = new CanvasSession(entry.id, entry.width, entry.height);
    this.base.width = this.overlay.width = entry.width;
    this.base.height = this.overlay.height = entry.height;
    const png = await this.api.fetchEnhancedPng(entry.id);
    const bitmap = await createImageBitmap(new Blob([png], { type: "image/png" }));
    this.base.getContext("2d")!.drawImage(bitmap, 0, 0);
    await this.session.loadSuggestions(this.api, decodePngBrowser);
    if (this.session.missingSuggestions.length) {
      this.say(`no suggestions for: ${this.session.missingSuggestions.join(", ")}`);
    } else {
      this.say("suggestions loaded");
    }
    this.applyZoom();
    this.refreshToolbar();
    this.draw();
  }

  private canvasPoint(event: PointerEvent): { x: number; y: number } {
    const rect = this.overlay.getBoundingClientRect();
    return {
      x: ((event.clientX - rect.left) / rect.width) * this.overlay.width,
      y: ((event.clientY - rect.top) / rect.height) * this.overlay.height,
    };
  }

  private strokeStart(event: PointerEvent): void {
    if (!this.session) return;
    this.drawing = true;
    this.strokePoints = [this.canvasPoint(event)];
  }

  private strokeMove(event: PointerEvent): void {
    if (!this.drawing) return;
    this.strokePoints.push(this.canvasPoint(event));
    this.previewStroke();
  }

  private strokeEnd(): void {
    if (!this.drawing || !this.session) return;
    this.drawing = false;
    const stroke = { points: this.strokePoints, radius: this.brushRadius };
    if (this.erasing) this.session.activeLayer.erase(stroke);
    else this.session.activeLayer.paint(stroke);
    this.strokePoints = [];
    this.refreshToolbar();
    this.draw();
  }

  private previewStroke(): void {
    this.draw();
    if (!this.strokePoints.length) return;
    const ctx = this.overlay.getContext("2d")!;
    ctx.strokeStyle = this.erasing ? "#ffffff" : LESION_COLORS[this.session!.activeLesion];
    ctx.lineWidth = this.brushRadius * 2;
    ctx.lineCap = "round";
    ctx.beginPath();
    ctx.moveTo(this.strokePoints[0].x, this.strokePoints[0].y);
    for (const point of this.strokePoints.slice(1)) ctx.lineTo(point.x, point.y);
    ctx.stroke();
  }

  private applyZoom(): void {
    for (const canvas of [this.base, this.overlay]) {
      canvas.style.width = `${canvas.width * this.zoom}px`;
      canvas.style.height = `${canvas.height * this.zoom}px`;
      canvas.style.imageRendering = "pixelated"; // pixel grid at high zoom
    }
  }

  private draw(): void {
    if (!this.session) return;
    const ctx = this.overlay.getContext("2d")!;
    const { width, height } = this.overlay;
    const composite = ctx.createImageData(width, height);
    for (const lesion of LESIONS) {
      const layer = this.session.layers[lesion];
      if (!layer.visible) continue;
      const [r, g, b] = hexToRgb(LESION_COLORS[lesion]);
      const alpha = layer.suggested ? 110 : 170; // suggestions look lighter until edited
      for (let i = 0; i < layer.grid.length; i++) {
        if (!layer.grid[i]) continue;
        composite.data[i * 4] = r;
        composite.data[i * 4 + 1] = g;
        composite.data[i * 4 + 2] = b;
        composite.data[i * 4 + 3] = alpha;
      }
    }
    ctx.clearRect(0, 0, width, height);
    ctx.putImageData(composite, 0, 0);
  }

  private refreshToolbar(): void {
    if (!this.session) return;
    for (const lesion of LESIONS) {
      const layer = this.session.layers[lesion];
      const button = el<HTMLButtonElement>(`layer-${lesion}`);
      button.classList.toggle("active", this.session.activeLesion === lesion);
      button.textContent = `${lesion} (${layer.pixelCount()}px${layer.suggested ? ", suggested" : ""})`;
      const slider = el<HTMLInputElement>(`confidence-${lesion}`);
      if (layer.confidence !== null) slider.value = String(layer.confidence);
    }
  }

  private async submit(): Promise<void> {
    if (!this.session) return;
    try {
      const result = await this.session.submit(this.api, this.annotator);
      this.say(
        result.submitted.length
          ? `submitted: ${result.submitted.join(", ")}`
          : "nothing to submit (all layers empty)",
      );
      await this.showAgreement();
    } catch (err) {
      this.report(err);
    }
  }

  private async showAgreement(): Promise<void> {
    if (!this.session) return;
    const report = await this.api.fetchAgreement(this.session.imageId);
    el<HTMLElement>("dashboard").innerHTML = renderDashboard(report);
  }

  private say(message: string): void {
    this.status.textContent = message;
    this.status.classList.remove("error");
  }

  private report(err: unknown): void {
    const message = err instanceof ApiError ? err.detail : String(err);
    this.status.textContent = message;
    this.status.classList.add("error");
  }
}

export function boot(): void {
  const app = new AnnotatorApp(
    (document.body.dataset.apiBase as string) || `${location.protocol}//${location.host}`,
  );
  el<HTMLButtonElement>("connect").onclick = () => void app.start();
}

if (typeof document !== "undefined" && document.getElementById("connect")) {
  boot();
}
