import assert from 'node:assert/strict';
import { spawnSync } from 'node:child_process';
import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';
import { test } from 'node:test';

import {
  beginSession,
  HEADER_SIZE,
  LOSSES_FILE,
  MANIFEST_FILE,
  TRAJECTORY_FILE,
} from '../src/capture';

function tempDir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), 'trajdim-capture-'));
}

// doubles that exercise the edges of the encoding: negative zero,
// subnormals, extremes, and a repeating fraction
const SPECIAL_VALUES = [
  0.0,
  -0.0,
  5e-324,
  -5e-324,
  2.2250738585072014e-308,
  1.7976931348623157e308,
  -1.7976931348623157e308,
  1 / 3,
  Math.PI,
  -1e-17,
];

function expectedBits(values: number[]): Buffer {
  const buf = Buffer.alloc(values.length * 8);
  const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  values.forEach((v, i) => view.setFloat64(i * 8, v, true));
  return buf;
}

test('session lifecycle writes exact TRJ1 headers', () => {
  const dir = tempDir();
  const session = beginSession(dir, 3, 2, { run_id: 'unit' });
  assert.equal(session.steps, 0);
  session.recordStep([1, 2, 3], [0.5, 0.25]);
  session.recordStep([4, 5, 6], [0.125, 0.0625]);
  assert.equal(session.steps, 2);
  session.finalize();

  const raw = fs.readFileSync(path.join(dir, TRAJECTORY_FILE));
  assert.equal(raw.subarray(0, 4).toString('ascii'), 'TRJ1');
  assert.equal(raw[4], 1); // version
  assert.equal(raw[5], 1); // trajectory kind
  assert.equal(raw.readUInt16LE(6), 0);
  assert.equal(raw.readBigUInt64LE(8), 2n);
  assert.equal(raw.readBigUInt64LE(16), 3n);
  assert.equal(raw.length, HEADER_SIZE + 2 * 3 * 8);

  const losses = fs.readFileSync(path.join(dir, LOSSES_FILE));
  assert.equal(losses[5], 2); // loss-matrix kind
  assert.equal(losses.readBigUInt64LE(8), 2n);
  assert.equal(losses.readBigUInt64LE(16), 2n);
});

test('payload bytes are bit-exact for special doubles', () => {
  const dir = tempDir();
  const session = beginSession(dir, SPECIAL_VALUES.length, 1);
  session.recordStep(SPECIAL_VALUES, [0.5]);
  session.recordStep(SPECIAL_VALUES.slice().reverse(), [0.25]);
  session.finalize();
  const raw = fs.readFileSync(path.join(dir, TRAJECTORY_FILE));
  const payload = raw.subarray(HEADER_SIZE);
  const expected = Buffer.concat([
    expectedBits(SPECIAL_VALUES),
    expectedBits(SPECIAL_VALUES.slice().reverse()),
  ]);
  assert.deepEqual(payload, expected);
});

test('constructor validates dimensions', () => {
  assert.throws(() => beginSession(tempDir(), 0, 4), /paramDim/);
  assert.throws(() => beginSession(tempDir(), 4, 0), /sampleCount/);
});

test('length mismatches name the iterate', () => {
  const session = beginSession(tempDir(), 2, 2);
  session.recordStep([1, 2], [3, 4]);
  assert.throws(() => session.recordStep([1], [3, 4]), /iterate 1: weight vector/);
  assert.throws(() => session.recordStep([1, 2], [3]), /iterate 1: loss vector/);
});

test('non-finite values are rejected with the iterate index', () => {
  const session = beginSession(tempDir(), 2, 1);
  assert.throws(() => session.recordStep([1, NaN], [0.5]), /iterate 0, position 1/);
  assert.throws(() => session.recordStep([1, 2], [Infinity]), /loss value at iterate 0/);
});

test('finalize needs two steps and refuses to run twice', () => {
  const session = beginSession(tempDir(), 1, 1);
  session.recordStep([1], [1]);
  assert.throws(() => session.finalize(), /at least 2/);
  session.recordStep([2], [2]);
  session.finalize();
  assert.throws(() => session.finalize(), /already finalized/);
  assert.throws(() => session.recordStep([3], [3]), /already finalized/);
});

test('manifest echoes metadata verbatim and references the payloads', () => {
  const dir = tempDir();
  const metadata = {
    run_id: 'ext_lr0.1_b32',
    learning_rate: 0.1,
    batch_size: 32,
    nested: { dataset: 'external', seeds: [1, 2, 3] },
  };
  const session = beginSession(dir, 2, 2, metadata);
  session.recordStep([1, 2], [3, 4]);
  session.recordStep([5, 6], [7, 8]);
  const manifestPath = session.finalize();
  assert.equal(manifestPath, path.join(dir, MANIFEST_FILE));
  const manifest = JSON.parse(fs.readFileSync(manifestPath, 'utf8'));
  assert.equal(manifest.schema_version, 1);
  assert.equal(manifest.run_id, 'ext_lr0.1_b32');
  assert.deepEqual(manifest.metadata, metadata);
  assert.deepEqual(manifest.files, { trajectory: TRAJECTORY_FILE, losses: LOSSES_FILE });
  assert.equal(manifest.config.steps, 2);
});

function pythonAvailable(): boolean {
  const probe = spawnSync('python3', ['-c', 'import trajdim'], { encoding: 'utf8' });
  return probe.status === 0;
}

test('primary component reads adapter output bit-for-bit', (t) => {
  if (!pythonAvailable()) {
    t.skip('python3 with trajdim not available');
    return;
  }
  const dir = tempDir();
  const session = beginSession(dir, SPECIAL_VALUES.length, 3, { run_id: 'roundtrip' });
  session.recordStep(SPECIAL_VALUES, [0.1, 0.2, 0.3]);
  session.recordStep(SPECIAL_VALUES.slice().reverse(), [0.4, 0.5, 0.6]);
  session.finalize();

  // the primary parser re-encodes what it parsed; identical bytes mean the
  // doubles survived the language boundary exactly
  const script = [
    'import sys',
    'from trajdim.trj1 import read_matrix',
    'values, kind = read_matrix(sys.argv[1])',
    "sys.stdout.buffer.write(values.astype('<f8').tobytes())",
  ].join('\n');
  const out = spawnSync('python3', ['-c', script, path.join(dir, TRAJECTORY_FILE)]);
  assert.equal(out.status, 0, out.stderr.toString());
  const written = fs
    .readFileSync(path.join(dir, TRAJECTORY_FILE))
    .subarray(HEADER_SIZE);
  assert.deepEqual(Buffer.from(out.stdout), written);
});

test('primary cmd_estimate completes on adapter-written files', (t) => {
  if (!pythonAvailable()) {
    t.skip('python3 with trajdim not available');
    return;
  }
  const dir = tempDir();
  const paramDim = 6;
  const sampleCount = 10;
  const session = beginSession(dir, paramDim, sampleCount, { run_id: 'e2e' });
  // deterministic random walk standing in for a post-convergence trajectory
  let state = 1234567891;
  const rand = () => {
    state = (1103515245 * state + 12345) % 2147483648;
    return state / 2147483648 - 0.5;
  };
  const weights = new Array(paramDim).fill(0);
  for (let stepIdx = 0; stepIdx < 400; stepIdx++) {
    for (let i = 0; i < paramDim; i++) {
      weights[i] += 0.01 * rand();
    }
    const losses = new Array(sampleCount)
      .fill(0)
      .map((_, i) => Math.abs(weights[i % paramDim]) + 0.01 * (i + 1));
    session.recordStep(weights, losses);
  }
  session.finalize();

  const report = path.join(dir, 'report.csv');
  const run = spawnSync('python3', [
    '-m', 'trajdim.cli', 'estimate',
    '--traj', path.join(dir, TRAJECTORY_FILE),
    '--metric', 'loss',
    '--losses', path.join(dir, LOSSES_FILE),
    '--sizes', '80,160,320,400',
    '--seed', '7',
    '--out', report,
    '--no-figures',
  ]);
  assert.equal(run.status, 0, run.stderr.toString());
  assert.ok(fs.existsSync(report));
  const text = fs.readFileSync(report, 'utf8');
  assert.match(text.split('\n')[0], /dimension/);
});
