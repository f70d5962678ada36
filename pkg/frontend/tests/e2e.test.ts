// Drives a real gateway (served by the Python CLI with the scripted backend)
// through a full visit: approach, consent, the three reply archetypes, an
// area request, and an explicit end. Asserts the console view reflects every
// gateway message in order and that replaying the recorded frames reproduces
// the same rendered chat log.

import { afterAll, beforeAll, describe, expect, it } from 'vitest'
import { spawn, type ChildProcess } from 'node:child_process'
import { mkdirSync, writeFileSync } from 'node:fs'
import { fileURLToPath } from 'node:url'
import { dirname, join } from 'node:path'
import WebSocket from 'ws'

import { parseGatewayMessage, type InboundMessage } from '../src/protocol'
import { initialState, reduce, renderChatLog, type ConsoleViewState } from '../src/state'

const here = dirname(fileURLToPath(import.meta.url))
const repoRoot = join(here, '..', '..')
const PORT = 8765
const BASE = `127.0.0.1:${PORT}`

let server: ChildProcess

async function waitForGateway(timeoutMs = 20000): Promise<void> {
  const deadline = Date.now() + timeoutMs
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`http://${BASE}/health`)
      if (resp.ok) return
    } catch {
      /* not up yet */
    }
    await new Promise((r) => setTimeout(r, 200))
  }
  throw new Error('gateway did not come up')
}

beforeAll(async () => {
  server = spawn(
    'python3',
    [
      '-m', 'tourguide.cli', 'serve',
      '--museum', join(repoRoot, 'fixtures', 'museum.json'),
      '--backend', join(repoRoot, 'fixtures', 'backend_rules.json'),
      '--bind', BASE,
      '--time-scale', '80',
    ],
    { cwd: repoRoot, stdio: 'ignore' },
  )
  await waitForGateway()
}, 30000)

afterAll(() => {
  server?.kill()
})

class Driver {
  ws: WebSocket
  frames: string[] = [] // raw gateway frames, '>'-prefixed for sent messages
  state: ConsoleViewState = initialState()
  private waiters: { pred: (s: ConsoleViewState) => boolean; resolve: () => void }[] = []

  constructor() {
    this.ws = new WebSocket(`ws://${BASE}/ws/session`)
    this.ws.on('message', (data) => {
      const raw = data.toString()
      const msg = parseGatewayMessage(raw)
      if (!msg) return
      this.frames.push(raw)
      this.state = reduce(this.state, { kind: 'gateway', message: msg })
      this.waiters = this.waiters.filter((w) => {
        if (w.pred(this.state)) {
          w.resolve()
          return false
        }
        return true
      })
    })
  }

  open(): Promise<void> {
    return new Promise((resolve) => this.ws.on('open', () => resolve()))
  }

  send(message: InboundMessage) {
    this.ws.send(JSON.stringify(message))
    this.frames.push('>' + JSON.stringify(message))
    this.state = reduce(this.state, { kind: 'sent', message })
  }

  until(pred: (s: ConsoleViewState) => boolean, what: string, timeoutMs = 20000): Promise<void> {
    if (pred(this.state)) return Promise.resolve()
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error(`timed out waiting for ${what}`)), timeoutMs)
      this.waiters.push({
        pred,
        resolve: () => {
          clearTimeout(timer)
          resolve()
        },
      })
    })
  }

  lastRobotLine(): string {
    const robot = this.state.chat.filter((e) => e.speaker === 'robot')
    return robot[robot.length - 1]?.text ?? ''
  }
}

describe('visitor console against a live gateway', () => {
  it('walks a full visit and the view mirrors the gateway', async () => {
    const museum = await (await fetch(`http://${BASE}/museum`)).json()

    const d = new Driver()
    await d.open()
    d.state = reduce(d.state, { kind: 'museum', doc: museum })
    await d.until((s) => s.pose !== null, 'initial pose')

    d.send({ type: 'approach' })
    await d.until((s) => s.chat.some((e) => e.speaker === 'robot'), 'greeting')
    expect(d.lastRobotLine().toLowerCase()).toMatch(/welcome|hello/)

    d.send({ type: 'consent', yes: true })
    await d.until((s) => s.phase === 'at_area' && s.visited.length === 1, 'first area')

    d.send({ type: 'utterance', text: 'Which type of ship is represented in this painting?' })
    await d.until((s) => d.lastRobotLine() === 'It is a military cruiser', 'answered reply')

    d.send({ type: 'utterance', text: 'What is the most beautiful ocean liner ever built?' })
    await d.until((s) => d.lastRobotLine().includes('ask the museum staff'), 'out-of-scope reply')

    d.send({ type: 'utterance', text: 'frgl mmph blorp' })
    await d.until((s) => d.lastRobotLine().includes('Could you repeat'), 'clarification reply')

    d.send({ type: 'utterance', text: "Let's continue." })
    await d.until((s) => s.visited.length === 2, 'second area')

    d.send({ type: 'utterance', text: 'Can you take me to the Military Ships area?' })
    await d.until((s) => s.visited.includes('military_ships'), 'requested area')

    d.send({ type: 'end_request' })
    await d.until((s) => s.summary !== null, 'tour summary')

    // every received frame advanced logical time monotonically
    const times = d.frames
      .filter((f) => !f.startsWith('>'))
      .map((f) => JSON.parse(f).logical_time as number)
    const sorted = [...times].sort((a, b) => a - b)
    expect(times).toEqual(sorted)

    expect(d.state.summary!.areas_visited.slice(0, 2)).toEqual(['sails', 'ports_of_europe'])
    expect(d.state.summary!.areas_visited).toContain('military_ships')

    // replaying the recorded log reproduces the same rendered chat
    const replay = () => {
      let s = initialState()
      s = reduce(s, { kind: 'museum', doc: museum })
      for (const frame of d.frames) {
        if (frame.startsWith('>')) s = reduce(s, { kind: 'sent', message: JSON.parse(frame.slice(1)) })
        else {
          const msg = parseGatewayMessage(frame)
          if (msg) s = reduce(s, { kind: 'gateway', message: msg })
        }
      }
      return s
    }
    expect(renderChatLog(replay())).toEqual(renderChatLog(d.state))

    // refresh the committed replay fixture from this real session
    mkdirSync(join(here, 'fixtures'), { recursive: true })
    writeFileSync(join(here, 'fixtures', 'recorded_log.json'), JSON.stringify(d.frames, null, 1))

    d.ws.close()
  }, 60000)

  it('a reconnect gets a fresh session id', async () => {
    const a = new Driver()
    await a.open()
    await a.until((s) => s.sessionId !== null, 'first session id')
    const first = a.state.sessionId
    a.ws.close()
    const b = new Driver()
    await b.open()
    await b.until((s) => s.sessionId !== null, 'second session id')
    expect(b.state.sessionId).not.toBe(first)
    b.ws.close()
  }, 20000)
})
