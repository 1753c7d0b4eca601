import init, { Demo } from "./pkg/pocket_demo.js";

const W = 1080, H = 1920;
const canvas = document.getElementById("screen");
const ctx = canvas.getContext("2d");
const scale = canvas.width / W;
const log = document.getElementById("log");
let demo;

function show(msg) {
  log.textContent = msg + "\n" + log.textContent;
}

function draw() {
  const obs = JSON.parse(demo.screen());
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = "13px system-ui";
  ctx.textBaseline = "middle";
  for (const t of obs.render_layer) {
    const { x, y, w, h } = t.bbox;
    ctx.setLineDash(t.origin === "overlay_only" ? [4, 3] : []);
    ctx.strokeStyle = "#bbb";
    ctx.strokeRect(x * scale, y * scale, w * scale, h * scale);
    ctx.fillStyle = "#222";
    ctx.fillText(t.text, x * scale + 6, (y + h / 2) * scale, w * scale - 12);
  }
  ctx.setLineDash([]);
  document.title = `${obs.app_id} / ${obs.activity}`;
}

function act(f) {
  try {
    const r = JSON.parse(f());
    show(JSON.stringify(r));
  } catch (e) {
    show("error: " + e.message);
  }
  draw();
}

function start() {
  const [app, activity] = document.getElementById("start").value.split("/");
  demo = new Demo(app, activity);
  draw();
}

await init();
start();

document.getElementById("start").addEventListener("change", start);
canvas.addEventListener("click", (e) => {
  const r = canvas.getBoundingClientRect();
  const x = Math.round((e.clientX - r.left) / scale);
  const y = Math.round((e.clientY - r.top) / scale);
  act(() => demo.tap(x, y));
});
document.getElementById("find").addEventListener("click", () => {
  const q = document.getElementById("query").value;
  act(() => demo.find(q));
});
document.getElementById("back").addEventListener("click", () => {
  act(() => demo.back());
});
