/**
 * S2RF feature-file format: binary interchange consumed by the metrics CLI.
 *
 * Layout (little-endian): magic "S2RF", uint32 version=1, uint32 n, uint32 d,
 * then n*d IEEE-754 float32 values row-major. File size must be exactly
 * 16 + 4*n*d bytes.
 */

import * as fs from 'fs'

export const S2RF_MAGIC = Buffer.from('S2RF', 'ascii')
export const S2RF_VERSION = 1
const HEADER_BYTES = 16

export interface FeatureMatrix {
  n: number
  d: number
  /** row-major, length n*d */
  values: Float32Array
}

export function encodeFeatureFile(feats: FeatureMatrix): Buffer {
  if (feats.values.length !== feats.n * feats.d) {
    throw new Error(`values length ${feats.values.length} != n*d = ${feats.n * feats.d}`)
  }
  const buf = Buffer.alloc(HEADER_BYTES + 4 * feats.n * feats.d)
  S2RF_MAGIC.copy(buf, 0)
  buf.writeUInt32LE(S2RF_VERSION, 4)
  buf.writeUInt32LE(feats.n, 8)
  buf.writeUInt32LE(feats.d, 12)
  for (let i = 0; i < feats.values.length; i++) {
    buf.writeFloatLE(feats.values[i], HEADER_BYTES + 4 * i)
  }
  return buf
}

export function writeFeatureFile(feats: FeatureMatrix, path: string): void {
  fs.writeFileSync(path, encodeFeatureFile(feats))
}

export function readFeatureFile(path: string): FeatureMatrix {
  const buf = fs.readFileSync(path)
  const findings = inspectBuffer(buf)
  if (findings.length > 0) {
    throw new Error(`${path}: ${findings[0]}`)
  }
  const n = buf.readUInt32LE(8)
  const d = buf.readUInt32LE(12)
  const values = new Float32Array(n * d)
  for (let i = 0; i < values.length; i++) {
    values[i] = buf.readFloatLE(HEADER_BYTES + 4 * i)
  }
  return { n, d, values }
}

function inspectBuffer(buf: Buffer): string[] {
  const findings: string[] = []
  if (buf.length < HEADER_BYTES || !buf.subarray(0, 4).equals(S2RF_MAGIC)) {
    findings.push('bad magic')
    return findings
  }
  const version = buf.readUInt32LE(4)
  if (version !== S2RF_VERSION) {
    findings.push(`unknown version ${version}`)
    return findings
  }
  const n = buf.readUInt32LE(8)
  const d = buf.readUInt32LE(12)
  const expected = HEADER_BYTES + 4 * n * d
  if (buf.length !== expected) {
    findings.push(`size mismatch: header declares ${n}x${d} (${expected} bytes), file has ${buf.length}`)
    return findings
  }
  for (let i = 0; i < n * d; i++) {
    const v = buf.readFloatLE(HEADER_BYTES + 4 * i)
    if (!Number.isFinite(v)) {
      findings.push(`non-finite value at row ${Math.floor(i / d)}, column ${i % d}`)
      return findings
    }
  }
  return findings
}

export interface VerifyReport {
  ok: boolean
  findings: string[]
  n?: number
  d?: number
}

/** Structural validation: magic, version, size arithmetic, finiteness. */
export function verifyFile(path: string): VerifyReport {
  if (!fs.existsSync(path)) {
    return { ok: false, findings: ['file does not exist'] }
  }
  const buf = fs.readFileSync(path)
  const findings = inspectBuffer(buf)
  if (findings.length > 0) {
    return { ok: false, findings }
  }
  return { ok: true, findings: [], n: buf.readUInt32LE(8), d: buf.readUInt32LE(12) }
}

/** Concatenate shard files row-wise; dimensionalities must agree. */
export function mergeFeatureFiles(inputs: string[], output: string): FeatureMatrix {
  if (inputs.length === 0) throw new Error('no input files to merge')
  const parts = inputs.map(readFeatureFile)
  const d = parts[0].d
  for (let i = 1; i < parts.length; i++) {
    if (parts[i].d !== d) {
      throw new Error(`dimensionality mismatch: ${inputs[i]} has d=${parts[i].d}, expected ${d}`)
    }
  }
  const n = parts.reduce((acc, p) => acc + p.n, 0)
  const values = new Float32Array(n * d)
  let offset = 0
  for (const p of parts) {
    values.set(p.values, offset)
    offset += p.values.length
  }
  const merged = { n, d, values }
  writeFeatureFile(merged, output)
  return merged
}
