export {
  CaptureSession,
  beginSession,
  HEADER_SIZE,
  KIND_LOSS_MATRIX,
  KIND_TRAJECTORY,
  LOSSES_FILE,
  MANIFEST_FILE,
  MANIFEST_SCHEMA_VERSION,
  SessionMetadata,
  TRAJECTORY_FILE,
  TRJ1_VERSION,
} from './capture';
