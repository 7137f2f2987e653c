/**
 * Minimal 8-bit image decoding (PNG via pngjs, PGM P5 / PPM P6 natively)
 * and deterministic directory listing.
 */

import * as fs from 'fs'
import * as path from 'path'
import { PNG } from 'pngjs'

export interface DecodedImage {
  width: number
  height: number
  channels: 1 | 3
  /** row-major, channel-interleaved uint8 samples */
  data: Uint8Array
}

const IMAGE_EXTENSIONS = new Set(['.png', '.pgm', '.ppm'])

/** Image files in a directory, lexicographically sorted by filename. */
export function listImagesSorted(dir: string): string[] {
  const entries = fs
    .readdirSync(dir)
    .filter(name => IMAGE_EXTENSIONS.has(path.extname(name).toLowerCase()))
    .sort()
  return entries.map(name => path.join(dir, name))
}

export function decodeImage(file: string): DecodedImage {
  const ext = path.extname(file).toLowerCase()
  const raw = fs.readFileSync(file)
  if (ext === '.png') return decodePng(raw, file)
  if (ext === '.pgm' || ext === '.ppm') return decodeNetpbm(raw, file)
  throw new Error(`${file}: unsupported image extension ${ext}`)
}

function decodePng(raw: Buffer, file: string): DecodedImage {
  let png: PNG
  try {
    png = PNG.sync.read(raw)
  } catch (err) {
    throw new Error(`${file}: corrupt PNG stream (${(err as Error).message})`)
  }
  // pngjs expands to 8-bit RGBA
  const { width, height, data } = png
  const out = new Uint8Array(width * height * 3)
  for (let i = 0, j = 0; i < data.length; i += 4, j += 3) {
    out[j] = data[i]
    out[j + 1] = data[i + 1]
    out[j + 2] = data[i + 2]
  }
  return { width, height, channels: 3, data: out }
}

function decodeNetpbm(raw: Buffer, file: string): DecodedImage {
  const header = parseNetpbmHeader(raw, file)
  const { magic, width, height, maxval, dataStart } = header
  if (maxval > 255) {
    throw new Error(`${file}: 16-bit netpbm not supported (maxval ${maxval})`)
  }
  const channels = magic === 'P5' ? 1 : 3
  const expected = width * height * channels
  const data = raw.subarray(dataStart, dataStart + expected)
  if (data.length !== expected) {
    throw new Error(`${file}: truncated pixel data (${data.length} of ${expected} bytes)`)
  }
  return { width, height, channels, data: new Uint8Array(data) }
}

function parseNetpbmHeader(raw: Buffer, file: string) {
  const magic = raw.subarray(0, 2).toString('ascii')
  if (magic !== 'P5' && magic !== 'P6') {
    throw new Error(`${file}: not a binary PGM/PPM file`)
  }
  // three whitespace-separated integers after the magic; '#' starts a comment
  const fields: number[] = []
  let pos = 2
  while (fields.length < 3 && pos < raw.length) {
    const ch = raw[pos]
    if (ch === 0x23) {
      while (pos < raw.length && raw[pos] !== 0x0a) pos++
    } else if (ch === 0x20 || ch === 0x09 || ch === 0x0a || ch === 0x0d) {
      pos++
    } else {
      let end = pos
      while (end < raw.length && raw[end] >= 0x30 && raw[end] <= 0x39) end++
      if (end === pos) throw new Error(`${file}: malformed netpbm header`)
      fields.push(parseInt(raw.subarray(pos, end).toString('ascii'), 10))
      pos = end
    }
  }
  if (fields.length !== 3) throw new Error(`${file}: malformed netpbm header`)
  return { magic, width: fields[0], height: fields[1], maxval: fields[2], dataStart: pos + 1 }
}

export function encodePgm(img: { width: number; height: number; data: Uint8Array }): Buffer {
  const header = Buffer.from(`P5\n${img.width} ${img.height}\n255\n`, 'ascii')
  return Buffer.concat([header, Buffer.from(img.data)])
}

export function encodePpm(img: { width: number; height: number; data: Uint8Array }): Buffer {
  const header = Buffer.from(`P6\n${img.width} ${img.height}\n255\n`, 'ascii')
  return Buffer.concat([header, Buffer.from(img.data)])
}
