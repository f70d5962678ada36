// Console view state: a pure projection of received gateway messages plus
// local input. No authoritative tour state lives here — every phase/pose/chat
// change originates from a GatewayMessage, so rendering is replayable from a
// recorded message log.

import type { GatewayMessage, InboundMessage, MuseumDoc, TranscriptDoc } from './protocol'

export const SILENCE_TIMEOUT_S = 120

export type ConnectionStatus = 'idle' | 'connecting' | 'open' | 'closed' | 'error'

export interface ChatEntry {
  speaker: 'visitor' | 'robot' | 'system'
  text: string
  time: number
}

export interface ConsoleViewState {
  connection: ConnectionStatus
  errorMessage: string | null
  museum: MuseumDoc | null
  sessionId: string | null
  pose: { x: number; y: number; heading: number } | null
  phase: string
  chat: ChatEntry[]
  visited: string[]
  summary: TranscriptDoc | null
  logicalTime: number
  lastActivityTime: number
  showCountdown: boolean
}

export type ConsoleEvent =
  | { kind: 'connecting' }
  | { kind: 'connected' }
  | { kind: 'disconnected' }
  | { kind: 'error'; message: string }
  | { kind: 'museum'; doc: MuseumDoc }
  | { kind: 'sent'; message: InboundMessage }
  | { kind: 'gateway'; message: GatewayMessage }

export function initialState(showCountdown = false): ConsoleViewState {
  return {
    connection: 'idle',
    errorMessage: null,
    museum: null,
    sessionId: null,
    pose: null,
    phase: 'idle',
    chat: [],
    visited: [],
    summary: null,
    logicalTime: 0,
    lastActivityTime: 0,
    showCountdown,
  }
}

function nearestAreaId(state: ConsoleViewState): string | null {
  if (!state.museum || !state.pose) return null
  let best: string | null = null
  let bestDist = Infinity
  for (const area of state.museum.areas) {
    const dx = area.waypoint[0] - state.pose.x
    const dy = area.waypoint[1] - state.pose.y
    const d = dx * dx + dy * dy
    if (d < bestDist) {
      bestDist = d
      best = area.id
    }
  }
  return best
}

function describeInbound(message: InboundMessage): string {
  switch (message.type) {
    case 'approach':
      return '(walks up to the robot)'
    case 'consent':
      return message.yes ? 'yes' : 'no'
    case 'utterance':
      return message.text
    case 'end_request':
      return '(asks to end the tour)'
  }
}

export function reduce(state: ConsoleViewState, event: ConsoleEvent): ConsoleViewState {
  switch (event.kind) {
    case 'connecting':
      return { ...state, connection: 'connecting', errorMessage: null }
    case 'connected':
      return { ...state, connection: 'open', errorMessage: null }
    case 'disconnected':
      return state.connection === 'error' ? state : { ...state, connection: 'closed' }
    case 'error':
      return { ...state, connection: 'error', errorMessage: event.message }
    case 'museum':
      return { ...state, museum: event.doc }
    case 'sent': {
      const entry: ChatEntry = {
        speaker: 'visitor',
        text: describeInbound(event.message),
        time: state.logicalTime,
      }
      return { ...state, chat: [...state.chat, entry], lastActivityTime: state.logicalTime }
    }
    case 'gateway':
      return applyGateway(state, event.message)
  }
}

function applyGateway(state: ConsoleViewState, msg: GatewayMessage): ConsoleViewState {
  const next: ConsoleViewState = {
    ...state,
    sessionId: msg.session_id,
    logicalTime: msg.logical_time,
  }
  switch (msg.type) {
    case 'robot_utterance':
      next.chat = [...state.chat, { speaker: 'robot', text: msg.text, time: msg.logical_time }]
      next.lastActivityTime = msg.logical_time
      return next
    case 'pose_update':
      next.pose = { x: msg.x, y: msg.y, heading: msg.heading }
      return next
    case 'phase_change': {
      next.phase = msg.phase
      if (msg.phase === 'at_area') {
        const area = nearestAreaId(next)
        if (area && area !== next.museum?.entrance && !state.visited.includes(area)) {
          next.visited = [...state.visited, area]
        }
      }
      return next
    }
    case 'notification':
      next.chat = [
        ...state.chat,
        { speaker: 'system', text: `(passing ${msg.artwork_id}) ${msg.text}`, time: msg.logical_time },
      ]
      return next
    case 'tour_summary':
      next.summary = msg.transcript
      next.visited = [...msg.transcript.areas_visited]
      return next
  }
}

export function unvisited(state: ConsoleViewState): string[] {
  if (!state.museum) return []
  return state.museum.areas
    .filter((a) => a.id !== state.museum!.entrance && !state.visited.includes(a.id))
    .map((a) => a.id)
}

// Seconds left before the robot gives up on a silent visitor; null while the
// timer is not running (no activity yet, or tour already over).
export function silenceCountdown(state: ConsoleViewState): number | null {
  if (!state.showCountdown) return null
  if (['idle', 'navigating', 'ending', 'done'].includes(state.phase)) return null
  const left = SILENCE_TIMEOUT_S - (state.logicalTime - state.lastActivityTime)
  return Math.max(0, left)
}

// Deterministic text projection of the chat pane, used by the replay tests
// and the summary screen.
export function renderChatLog(state: ConsoleViewState): string[] {
  return state.chat.map((entry) => {
    const who = entry.speaker === 'visitor' ? 'YOU' : entry.speaker === 'robot' ? 'ROBOT' : '*'
    return `[${entry.time.toFixed(0)}s] ${who}: ${entry.text}`
  })
}
