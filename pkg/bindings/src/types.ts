/** JSON shapes spoken by the service and the JSONL files. */

export interface BoxRecord {
  frame_id?: string;
  class: string;
  cx: number;
  cy: number;
  cz: number;
  w: number;
  l: number;
  h: number;
  yaw: number;
  score?: number;
  num_points?: number;
}

export interface FramePayload {
  frame_id: string;
  cloud_b64: string;
  boxes: BoxRecord[];
}

/** Partial config document; omitted fields take the service's ONCE defaults. */
export interface ConfigDoc {
  grid?: {
    range?: number[];
    voxel_size?: number[];
    max_points_per_voxel?: number;
    out_factor?: number;
    max_voxels?: number | null;
  };
  classes?: string[];
  attr_dim?: number;
  corners?: number;
  loss_weights?: { gamma?: number; lambda?: number; alpha?: number; beta?: number };
  eval?: Record<string, unknown>;
  augmentation?: { sample_counts?: number[] };
}

export interface ClassEvalResult {
  ap: number;
  aph?: number;
  buckets: Record<string, number>;
  tp: number;
  fp: number;
  fn: number;
  n_gt: number;
  undefined: boolean;
}

export interface EvalReport {
  classes: Record<string, ClassEvalResult>;
  mAP: number;
  bucket_labels: string[];
  levels?: Record<string, { classes: Record<string, ClassEvalResult>; mAP: number; mAPH: number }>;
}

export interface CornerSelectionRecord {
  vc: [number, number];
  pvcl: [number, number];
  pvcw: [number, number];
  ivc: [number, number];
  corner_indices: [number, number, number, number];
  max_quadrant: number;
  degenerate: boolean;
}

export interface LossWeightsDoc {
  gamma?: number;
  lambda?: number;
  alpha?: number;
  beta?: number;
}
