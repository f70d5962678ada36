// Wire protocol for the live session gateway. JSON frames over a persistent
// WebSocket, snake_case fields; every server message carries the session id
// and the session's logical time.

export interface OutboundBase {
  session_id: string
  logical_time: number
}

export interface RobotUtteranceMsg extends OutboundBase {
  type: 'robot_utterance'
  text: string
}

export interface PoseUpdateMsg extends OutboundBase {
  type: 'pose_update'
  x: number
  y: number
  heading: number
}

export interface PhaseChangeMsg extends OutboundBase {
  type: 'phase_change'
  phase: string
}

export interface NotificationMsg extends OutboundBase {
  type: 'notification'
  artwork_id: string
  text: string
}

export interface TourSummaryMsg extends OutboundBase {
  type: 'tour_summary'
  transcript: TranscriptDoc
}

export type GatewayMessage =
  | RobotUtteranceMsg
  | PoseUpdateMsg
  | PhaseChangeMsg
  | NotificationMsg
  | TourSummaryMsg

export interface TranscriptDoc {
  session_id: string
  start_s: number
  end_s: number
  areas_visited: string[]
  messages: { role: string; text: string; time_s: number; label: string | null }[]
  tool_calls: { name: string; destination?: string; time_s: number }[]
  fault_flags: string[]
}

export type InboundMessage =
  | { type: 'approach' }
  | { type: 'consent'; yes: boolean }
  | { type: 'utterance'; text: string }
  | { type: 'end_request' }

// GET /museum snapshot, as served by the gateway.
export interface MuseumDoc {
  grid: { width: number; height: number; resolution_m: number; occupied: number[][] }
  entrance: string
  areas: {
    id: string
    name: string
    waypoint: number[]
    boundary: number[][]
    intro_text: string
    mandatory_rank?: number
  }[]
  artworks: {
    id: string
    title: string
    author: string
    position: number[]
    trigger_radius_m: number
  }[]
}

export function parseGatewayMessage(raw: string): GatewayMessage | null {
  let data: any
  try {
    data = JSON.parse(raw)
  } catch {
    return null
  }
  const known = ['robot_utterance', 'pose_update', 'phase_change', 'notification', 'tour_summary']
  if (!data || !known.includes(data.type)) return null
  return data as GatewayMessage
}
