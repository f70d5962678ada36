// Entry point: wires the gateway connection to the reducer and the renderers.

import { parseGatewayMessage, type InboundMessage } from './protocol'
import { initialState, reduce, type ConsoleEvent, type ConsoleViewState } from './state'
import { renderChat, renderMap, renderStatus, renderSummary } from './render'

const params = new URLSearchParams(location.search)
const gatewayBase = params.get('gateway') ?? `${location.hostname}:8000`
const showCountdown = params.get('countdown') === '1'

let state: ConsoleViewState = initialState(showCountdown)
let ws: WebSocket | null = null

const el = (id: string) => document.getElementById(id)!

function rerender() {
  renderMap(el('map') as HTMLCanvasElement, state)
  renderChat(el('chat'), state)
  renderStatus(el('status'), state)
  renderSummary(el('summary'), state)
  const connected = state.connection === 'open'
  for (const id of ['approach', 'yes', 'no', 'say', 'end']) {
    ;(el(id) as HTMLButtonElement | HTMLInputElement).disabled = !connected
  }
  ;(el('connect') as HTMLButtonElement).textContent =
    connected ? 'Reconnect (new session)' : 'Connect'
}

function dispatch(event: ConsoleEvent) {
  state = reduce(state, event)
  rerender()
}

function send(message: InboundMessage) {
  if (!ws || ws.readyState !== WebSocket.OPEN) return
  ws.send(JSON.stringify(message))
  dispatch({ kind: 'sent', message })
}

async function connect() {
  ws?.close()
  state = initialState(showCountdown) // a reconnect is a fresh session
  dispatch({ kind: 'connecting' })
  try {
    const resp = await fetch(`http://${gatewayBase}/museum`)
    if (!resp.ok) throw new Error(`museum snapshot: HTTP ${resp.status}`)
    dispatch({ kind: 'museum', doc: await resp.json() })
  } catch (err) {
    dispatch({ kind: 'error', message: `gateway unreachable at ${gatewayBase}` })
    return
  }
  ws = new WebSocket(`ws://${gatewayBase}/ws/session`)
  ws.onopen = () => dispatch({ kind: 'connected' })
  ws.onclose = () => dispatch({ kind: 'disconnected' })
  ws.onerror = () => dispatch({ kind: 'error', message: 'connection lost' })
  ws.onmessage = (ev) => {
    const msg = parseGatewayMessage(ev.data)
    if (msg) dispatch({ kind: 'gateway', message: msg })
  }
}

el('connect').onclick = () => void connect()
el('approach').onclick = () => send({ type: 'approach' })
el('yes').onclick = () => send({ type: 'consent', yes: true })
el('no').onclick = () => send({ type: 'consent', yes: false })
el('end').onclick = () => send({ type: 'end_request' })
el('say').onclick = () => {
  const input = el('text') as HTMLInputElement
  if (input.value.trim()) {
    send({ type: 'utterance', text: input.value.trim() })
    input.value = ''
  }
}
;(el('text') as HTMLInputElement).onkeydown = (ev) => {
  if (ev.key === 'Enter') (el('say') as HTMLButtonElement).click()
}

rerender()
