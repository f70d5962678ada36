// DOM/canvas rendering of the console view state.

import type { ConsoleViewState } from './state'
import { renderChatLog, silenceCountdown, unvisited } from './state'

const SCALE = 48 // pixels per metre

export function renderMap(canvas: HTMLCanvasElement, state: ConsoleViewState): void {
  const ctx = canvas.getContext('2d')
  if (!ctx || !state.museum) return
  const grid = state.museum.grid
  canvas.width = grid.width * grid.resolution_m * SCALE
  canvas.height = grid.height * grid.resolution_m * SCALE
  const px = (x: number) => x * SCALE
  // y grows upward in world coordinates, downward on canvas
  const py = (y: number) => canvas.height - y * SCALE

  ctx.fillStyle = '#fafafa'
  ctx.fillRect(0, 0, canvas.width, canvas.height)

  ctx.fillStyle = '#444'
  for (const [row, col] of state.museum.grid.occupied) {
    const res = grid.resolution_m
    ctx.fillRect(px(col * res), py((row + 1) * res), res * SCALE, res * SCALE)
  }

  for (const area of state.museum.areas) {
    ctx.strokeStyle = state.visited.includes(area.id) ? '#2a7' : '#aac'
    ctx.beginPath()
    area.boundary.forEach(([x, y], i) => {
      if (i === 0) ctx.moveTo(px(x), py(y))
      else ctx.lineTo(px(x), py(y))
    })
    ctx.closePath()
    ctx.stroke()
    ctx.fillStyle = '#668'
    ctx.font = '12px sans-serif'
    ctx.fillText(area.name, px(area.waypoint[0]) - 20, py(area.waypoint[1]) - 10)
  }

  ctx.fillStyle = '#c60'
  for (const art of state.museum.artworks) {
    ctx.beginPath()
    ctx.arc(px(art.position[0]), py(art.position[1]), 4, 0, Math.PI * 2)
    ctx.fill()
  }

  if (state.pose) {
    const { x, y, heading } = state.pose
    ctx.fillStyle = '#06c'
    ctx.beginPath()
    ctx.arc(px(x), py(y), 8, 0, Math.PI * 2)
    ctx.fill()
    ctx.strokeStyle = '#06c'
    ctx.beginPath()
    ctx.moveTo(px(x), py(y))
    ctx.lineTo(px(x + 0.6 * Math.cos(heading)), py(y + 0.6 * Math.sin(heading)))
    ctx.stroke()
  }
}

export function renderChat(container: HTMLElement, state: ConsoleViewState): void {
  container.textContent = ''
  for (const line of renderChatLog(state)) {
    const div = document.createElement('div')
    div.className = line.includes('] YOU:') ? 'turn you' : line.includes('] ROBOT:') ? 'turn robot' : 'turn system'
    div.textContent = line
    container.appendChild(div)
  }
  container.scrollTop = container.scrollHeight
}

export function renderStatus(bar: HTMLElement, state: ConsoleViewState): void {
  const bits = [`connection: ${state.connection}`, `phase: ${state.phase}`]
  if (state.errorMessage) bits.push(`error: ${state.errorMessage}`)
  const left = silenceCountdown(state)
  if (left !== null) bits.push(`robot leaves in ${left.toFixed(0)}s`)
  const todo = unvisited(state)
  if (todo.length) bits.push(`still to see: ${todo.join(', ')}`)
  bar.textContent = bits.join('  |  ')
  bar.classList.toggle('error', state.connection === 'error')
}

export function renderSummary(panel: HTMLElement, state: ConsoleViewState): void {
  if (!state.summary) {
    panel.hidden = true
    return
  }
  const t = state.summary
  const minutes = ((t.end_s - t.start_s) / 60).toFixed(1)
  const questions = t.messages.filter((m) => m.role === 'visitor' && m.label === 'question').length
  panel.hidden = false
  panel.textContent =
    `Tour over! ${minutes} min, areas visited: ${t.areas_visited.join(', ') || 'none'}, ` +
    `questions asked: ${questions}`
}
