/**
 * HTTP client exposing the toolkit's numeric operations over typed arrays.
 *
 * Results are numerically identical to the service's own outputs by
 * construction: tensors travel as TNS1 bytes both ways and are never
 * re-encoded lossily on this side.
 */

import {
  ArrayView,
  cloudToB64,
  tensorFromB64,
  tensorToB64,
} from "./tensor.js";
import type {
  BoxRecord,
  ConfigDoc,
  CornerSelectionRecord,
  EvalReport,
  FramePayload,
  LossWeightsDoc,
} from "./types.js";

/** Raised when the service rejects a request; carries its error text. */
export class ServiceError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`${status}: ${detail}`);
    this.name = "ServiceError";
  }
}

export interface FrameInput {
  frameId: string;
  /** N x (3 + attrDim) float32 row block. */
  cloud: Float32Array;
  boxes: BoxRecord[];
}

export interface TargetsResult {
  tensors: Record<string, ArrayView>;
  /** Exact TNS1 bytes as served, for byte-level comparison and persistence. */
  raw: Record<string, Uint8Array>;
  collisions: number;
  skippedCorners: number;
  skippedCenters: number;
}

export interface VoxelizeResult {
  numVoxels: number;
  indices: ArrayView;
  blocks: ArrayView;
  counts: ArrayView;
}

export interface DecodeOptions {
  maxPeaks?: number;
  threshold?: number;
  nmsIou?: number;
  frameId?: string;
}

function framePayload(frame: FrameInput): FramePayload {
  return {
    frame_id: frame.frameId,
    cloud_b64: cloudToB64(frame.cloud),
    boxes: frame.boxes,
  };
}

export class BevkitClient {
  constructor(
    readonly baseUrl: string,
    private readonly config: ConfigDoc = {},
  ) {}

  /** Same client pointed at a different configuration document. */
  withConfig(config: ConfigDoc): BevkitClient {
    return new BevkitClient(this.baseUrl, config);
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(new URL(path, this.baseUrl), {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let detail = await response.text();
      try {
        detail = (JSON.parse(detail) as { detail?: string }).detail ?? detail;
      } catch {
        // non-JSON error body: keep the raw text
      }
      throw new ServiceError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  async health(): Promise<{ status: string; version: string }> {
    return this.request("GET", "/health");
  }

  async preset(name: "once" | "waymo"): Promise<ConfigDoc> {
    return this.request("GET", `/config/presets/${name}`);
  }

  async voxelize(cloud: Float32Array, seed = 0): Promise<VoxelizeResult> {
    const body = {
      config: this.config,
      cloud_b64: cloudToB64(cloud),
      seed,
    };
    const res = await this.request<{
      num_voxels: number;
      indices_b64: string;
      blocks_b64: string;
      counts_b64: string;
    }>("POST", "/voxelize", body);
    return {
      numVoxels: res.num_voxels,
      indices: tensorFromB64(res.indices_b64),
      blocks: tensorFromB64(res.blocks_b64),
      counts: tensorFromB64(res.counts_b64),
    };
  }

  async assignCorners(frame: FrameInput): Promise<CornerSelectionRecord[]> {
    const res = await this.request<{ selections: CornerSelectionRecord[] }>(
      "POST",
      "/corners/assign",
      { config: this.config, frame: framePayload(frame) },
    );
    return res.selections;
  }

  async buildTargets(
    frame: FrameInput,
    opts: { corners?: number; skipDegenerate?: boolean } = {},
  ): Promise<TargetsResult> {
    const res = await this.request<{
      tensors: Record<string, string>;
      collisions: number;
      skipped_corners: number;
      skipped_centers: number;
    }>("POST", "/targets/build", {
      config: this.config,
      frame: framePayload(frame),
      corners: opts.corners ?? null,
      skip_degenerate: opts.skipDegenerate ?? false,
    });
    const tensors: Record<string, ArrayView> = {};
    const raw: Record<string, Uint8Array> = {};
    for (const [name, b64] of Object.entries(res.tensors)) {
      raw[name] = new Uint8Array(Buffer.from(b64, "base64"));
      tensors[name] = tensorFromB64(b64);
    }
    return {
      tensors,
      raw,
      collisions: res.collisions,
      skippedCorners: res.skipped_corners,
      skippedCenters: res.skipped_centers,
    };
  }

  /** Data-loader entry point: all frames in flight at once, order preserved. */
  async buildTargetsBatch(
    frames: FrameInput[],
    opts: { corners?: number; skipDegenerate?: boolean } = {},
  ): Promise<TargetsResult[]> {
    return Promise.all(frames.map((frame) => this.buildTargets(frame, opts)));
  }

  async focalLoss(
    pred: ArrayView,
    target: ArrayView,
    opts: { weights?: LossWeightsDoc; withGrad?: boolean } = {},
  ): Promise<{ value: number; grad?: ArrayView }> {
    const res = await this.request<{ value: number; grad_b64: string | null }>(
      "POST",
      "/losses/focal",
      {
        pred_b64: tensorToB64(pred),
        target_b64: tensorToB64(target),
        weights: opts.weights ?? {},
        with_grad: opts.withGrad ?? false,
      },
    );
    return {
      value: res.value,
      grad: res.grad_b64 ? tensorFromB64(res.grad_b64) : undefined,
    };
  }

  async l1Loss(
    pred: ArrayView,
    target: ArrayView,
    mask: ArrayView,
    opts: { withGrad?: boolean } = {},
  ): Promise<{ value: number; grad?: ArrayView }> {
    const res = await this.request<{ value: number; grad_b64: string | null }>(
      "POST",
      "/losses/l1",
      {
        pred_b64: tensorToB64(pred),
        target_b64: tensorToB64(target),
        mask_b64: tensorToB64(mask),
        with_grad: opts.withGrad ?? false,
      },
    );
    return {
      value: res.value,
      grad: res.grad_b64 ? tensorFromB64(res.grad_b64) : undefined,
    };
  }

  async totalLoss(
    parts: { centerCls: number; centerReg: number; cornerCls: number; cornerReg: number },
    weights: LossWeightsDoc = {},
  ): Promise<number> {
    const res = await this.request<{ total: number }>("POST", "/losses/total", {
      center_cls: parts.centerCls,
      center_reg: parts.centerReg,
      corner_cls: parts.cornerCls,
      corner_reg: parts.cornerReg,
      weights,
    });
    return res.total;
  }

  async decodeBoxes(
    heatmap: ArrayView,
    regression: ArrayView,
    opts: DecodeOptions = {},
  ): Promise<{ detections: BoxRecord[]; dropped: number }> {
    return this.request("POST", "/decode", {
      config: this.config,
      heatmap_b64: tensorToB64(heatmap),
      regression_b64: tensorToB64(regression),
      max_peaks: opts.maxPeaks ?? 100,
      threshold: opts.threshold ?? 0.1,
      nms_iou: opts.nmsIou ?? null,
      frame_id: opts.frameId ?? "",
    });
  }

  async evaluateOnce(detections: BoxRecord[], groundTruths: BoxRecord[]): Promise<EvalReport> {
    const res = await this.request<{ report: EvalReport }>("POST", "/evaluate", {
      config: this.config,
      dataset: "once",
      detections,
      ground_truths: groundTruths,
    });
    return res.report;
  }

  async evaluateWaymo(detections: BoxRecord[], groundTruths: BoxRecord[]): Promise<EvalReport> {
    const res = await this.request<{ report: EvalReport }>("POST", "/evaluate", {
      config: this.config,
      dataset: "waymo",
      detections,
      ground_truths: groundTruths,
    });
    return res.report;
  }

  async fixture(name: string): Promise<FramePayload> {
    return this.request("GET", `/synth/fixture/${name}`);
  }

  async fixtureNames(): Promise<string[]> {
    return this.request("GET", "/synth/fixtures");
  }
}
