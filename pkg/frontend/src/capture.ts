/**
 * Capture hook for external training loops.
 *
 * After each post-convergence optimizer step, hand the session the
 * flattened weight vector and the per-sample training losses; it streams
 * them into two TRJ1 files (trajectory + loss matrix) and finishes with a
 * manifest the analysis CLI can consume. The adapter does no numerical
 * work of its own: it is a bit-exact serializer.
 *
 * TRJ1 layout (little-endian): magic "TRJ1", u8 version = 1, u8 payload
 * kind (1 = trajectory, 2 = loss matrix), u16 reserved zero, u64 row
 * count, u64 column count, then rows x cols IEEE-754 float64 values in
 * row-major order.
 */
import * as fs from 'node:fs';
import * as path from 'node:path';

export const TRJ1_VERSION = 1;
export const KIND_TRAJECTORY = 1;
export const KIND_LOSS_MATRIX = 2;
export const HEADER_SIZE = 24;
export const MANIFEST_SCHEMA_VERSION = 1;

const MAGIC = Buffer.from('TRJ1', 'ascii');
const ROW_COUNT_OFFSET = 8;

export const TRAJECTORY_FILE = 'trajectory.trj1';
export const LOSSES_FILE = 'losses.trj1';
export const MANIFEST_FILE = 'manifest.json';

export interface SessionMetadata {
  [key: string]: unknown;
}

function buildHeader(kind: number, rows: number, cols: number): Buffer {
  const header = Buffer.alloc(HEADER_SIZE);
  MAGIC.copy(header, 0);
  header.writeUInt8(TRJ1_VERSION, 4);
  header.writeUInt8(kind, 5);
  header.writeUInt16LE(0, 6);
  header.writeBigUInt64LE(BigInt(rows), ROW_COUNT_OFFSET);
  header.writeBigUInt64LE(BigInt(cols), 16);
  return header;
}

function encodeRow(values: ArrayLike<number>): Buffer {
  // writeDoubleLE preserves the exact IEEE-754 bits, including negative
  // zero and subnormals; byte order is pinned regardless of platform.
  const buf = Buffer.alloc(values.length * 8);
  for (let i = 0; i < values.length; i++) {
    buf.writeDoubleLE(values[i], i * 8);
  }
  return buf;
}

function assertFiniteRow(values: ArrayLike<number>, step: number, what: string): void {
  for (let i = 0; i < values.length; i++) {
    if (!Number.isFinite(values[i])) {
      throw new Error(
        `non-finite ${what} value at iterate ${step}, position ${i}: ${values[i]}`,
      );
    }
  }
}

export class CaptureSession {
  readonly directory: string;
  readonly paramDim: number;
  readonly sampleCount: number;
  private readonly metadata: SessionMetadata;
  private trajectoryFd: number;
  private lossFd: number;
  private steps_ = 0;
  private finalized = false;

  constructor(
    directory: string,
    paramDim: number,
    sampleCount: number,
    metadata: SessionMetadata = {},
  ) {
    if (!Number.isInteger(paramDim) || paramDim < 1) {
      throw new Error(`paramDim must be a positive integer, got ${paramDim}`);
    }
    if (!Number.isInteger(sampleCount) || sampleCount < 1) {
      throw new Error(`sampleCount must be a positive integer, got ${sampleCount}`);
    }
    this.directory = directory;
    this.paramDim = paramDim;
    this.sampleCount = sampleCount;
    this.metadata = metadata;
    fs.mkdirSync(directory, { recursive: true });
    // headers carry a placeholder row count until finalize patches it
    this.trajectoryFd = fs.openSync(path.join(directory, TRAJECTORY_FILE), 'w');
    fs.writeSync(this.trajectoryFd, buildHeader(KIND_TRAJECTORY, 0, paramDim));
    this.lossFd = fs.openSync(path.join(directory, LOSSES_FILE), 'w');
    fs.writeSync(this.lossFd, buildHeader(KIND_LOSS_MATRIX, 0, sampleCount));
  }

  get steps(): number {
    return this.steps_;
  }

  /** Append one post-step snapshot: flattened weights + per-sample losses. */
  recordStep(weights: ArrayLike<number>, perSampleLosses: ArrayLike<number>): void {
    if (this.finalized) {
      throw new Error('session already finalized');
    }
    if (weights.length !== this.paramDim) {
      throw new Error(
        `iterate ${this.steps_}: weight vector has length ${weights.length}, ` +
          `expected ${this.paramDim}`,
      );
    }
    if (perSampleLosses.length !== this.sampleCount) {
      throw new Error(
        `iterate ${this.steps_}: loss vector has length ${perSampleLosses.length}, ` +
          `expected ${this.sampleCount}`,
      );
    }
    assertFiniteRow(weights, this.steps_, 'weight');
    assertFiniteRow(perSampleLosses, this.steps_, 'loss');
    fs.writeSync(this.trajectoryFd, encodeRow(weights));
    fs.writeSync(this.lossFd, encodeRow(perSampleLosses));
    this.steps_ += 1;
  }

  /** Patch the row counts, close both payloads, write the manifest. */
  finalize(): string {
    if (this.finalized) {
      throw new Error('session already finalized');
    }
    if (this.steps_ < 2) {
      throw new Error(`need at least 2 recorded steps, got ${this.steps_}`);
    }
    const rows = Buffer.alloc(8);
    rows.writeBigUInt64LE(BigInt(this.steps_));
    fs.writeSync(this.trajectoryFd, rows, 0, 8, ROW_COUNT_OFFSET);
    fs.writeSync(this.lossFd, rows, 0, 8, ROW_COUNT_OFFSET);
    fs.closeSync(this.trajectoryFd);
    fs.closeSync(this.lossFd);
    this.finalized = true;

    const manifestPath = path.join(this.directory, MANIFEST_FILE);
    const manifest = {
      schema_version: MANIFEST_SCHEMA_VERSION,
      run_id: (this.metadata['run_id'] as string | undefined) ?? 'external-capture',
      files: { trajectory: TRAJECTORY_FILE, losses: LOSSES_FILE },
      config: {
        param_dim: this.paramDim,
        sample_count: this.sampleCount,
        steps: this.steps_,
        capture_window: 'post-convergence iterates only',
      },
      metadata: this.metadata,
      tool_version: '0.1.0',
    };
    fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + '\n');
    return manifestPath;
  }
}

export function beginSession(
  directory: string,
  paramDim: number,
  sampleCount: number,
  metadata: SessionMetadata = {},
): CaptureSession {
  return new CaptureSession(directory, paramDim, sampleCount, metadata);
}
