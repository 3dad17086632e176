export {
  ArrayView,
  DataFormatError,
  Dtype,
  TensorData,
  cloudFromB64,
  cloudToB64,
  decodeTns1,
  elementCount,
  encodeTns1,
  tensorFromB64,
  tensorToB64,
  toAlignedFloat32,
  view,
} from "./tensor.js";
export {
  BevkitClient,
  DecodeOptions,
  FrameInput,
  ServiceError,
  TargetsResult,
  VoxelizeResult,
} from "./client.js";
export {
  loadConfigFile,
  readBoxesJsonl,
  readPointCloudBin,
  readTns1,
  writeBoxesJsonl,
  writePointCloudBin,
  writeTns1,
} from "./fileio.js";
export type {
  BoxRecord,
  ClassEvalResult,
  ConfigDoc,
  CornerSelectionRecord,
  EvalReport,
  FramePayload,
  LossWeightsDoc,
} from "./types.js";
