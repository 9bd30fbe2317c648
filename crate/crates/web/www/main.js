import init, { Demo } from "./pkg/navsim_web.js";

const canvas = document.getElementById("map");
const ctx = canvas.getContext("2d");
const status = document.getElementById("status");
const showParticles = document.getElementById("show-particles");
const showScan = document.getElementById("show-scan");

let demo;
let scale;
let heightM;
let mapImage;
let scanPoints = new Float64Array();
let estimate = null;
let goal = null;
let path = new Float64Array();

const px = (x) => x * scale;
const py = (y) => (heightM - y) * scale;

function buildMapImage() {
  const w = demo.width();
  const h = demo.height();
  const cells = demo.cells();
  const image = new ImageData(w, h);
  for (let iy = 0; iy < h; iy++) {
    for (let ix = 0; ix < w; ix++) {
      // grid row 0 is the lowest y, image row 0 is the top
      const c = cells[iy * w + ix];
      const o = ((h - 1 - iy) * w + ix) * 4;
      const v = c === 0 ? 255 : c === 1 ? 40 : 160;
      image.data.set([v, v, v, 255], o);
    }
  }
  const off = new OffscreenCanvas(w, h);
  off.getContext("2d").putImageData(image, 0, 0);
  mapImage = off;
}

function pose(p, color, r) {
  const [x, y, th] = p;
  ctx.fillStyle = color;
  ctx.strokeStyle = color;
  ctx.beginPath();
  ctx.arc(px(x), py(y), r, 0, 2 * Math.PI);
  ctx.fill();
  ctx.beginPath();
  ctx.moveTo(px(x), py(y));
  ctx.lineTo(px(x + 0.35 * Math.cos(th)), py(y + 0.35 * Math.sin(th)));
  ctx.lineWidth = 2;
  ctx.stroke();
}

function draw() {
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(mapImage, 0, 0, canvas.width, canvas.height);

  if (showParticles.checked) {
    ctx.fillStyle = "rgba(220, 120, 0, 0.5)";
    const p = demo.particles();
    for (let i = 0; i < p.length; i += 3) {
      ctx.fillRect(px(p[i]) - 1, py(p[i + 1]) - 1, 2, 2);
    }
  }
  if (showScan.checked) {
    ctx.fillStyle = "#d00";
    for (let i = 0; i < scanPoints.length; i += 2) {
      ctx.fillRect(px(scanPoints[i]) - 1.5, py(scanPoints[i + 1]) - 1.5, 3, 3);
    }
  }
  if (path.length >= 4) {
    ctx.strokeStyle = "#1a7f37";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(px(path[0]), py(path[1]));
    for (let i = 2; i < path.length; i += 2) ctx.lineTo(px(path[i]), py(path[i + 1]));
    ctx.stroke();
  }
  if (goal) {
    ctx.strokeStyle = "#1a7f37";
    ctx.lineWidth = 2;
    ctx.strokeRect(px(goal[0]) - 5, py(goal[1]) - 5, 10, 10);
  }
  pose(demo.truth(), "#0057b8", 5);
  if (estimate) pose(estimate, "#8a2be2", 3);

  const t = demo.truth();
  const lines = [`truth     ${t[0].toFixed(2)} ${t[1].toFixed(2)} ${t[2].toFixed(2)}`];
  if (estimate) {
    const err = Math.hypot(estimate[0] - t[0], estimate[1] - t[1]);
    lines.push(`estimate  ${estimate[0].toFixed(2)} ${estimate[1].toFixed(2)} ${estimate[2].toFixed(2)}`);
    lines.push(`error     ${err.toFixed(3)} m`);
  }
  if (goal) lines.push(path.length ? `path      ${path.length / 2} cells` : "path      none");
  status.textContent = lines.join("\n");
}

function replan() {
  if (!goal) return;
  const t = demo.truth();
  try {
    path = demo.plan(t[0], t[1], goal[0], goal[1]);
  } catch (e) {
    path = new Float64Array();
    status.textContent = String(e);
  }
}

function drive(v, omega) {
  estimate = Array.from(demo.drive(v, omega, 0.25));
  scanPoints = demo.scan();
  replan();
  draw();
}

canvas.addEventListener("click", (e) => {
  const r = canvas.getBoundingClientRect();
  const x = (e.clientX - r.left) / scale;
  const y = heightM - (e.clientY - r.top) / scale;
  if (e.shiftKey) {
    demo.add_obstacle(x, y, 0.3);
    buildMapImage();
  } else {
    goal = [x, y];
  }
  replan();
  draw();
});

document.addEventListener("keydown", (e) => {
  const moves = {
    ArrowUp: [0.4, 0],
    ArrowDown: [-0.2, 0],
    ArrowLeft: [0, 1.2],
    ArrowRight: [0, -1.2],
  };
  const m = moves[e.key];
  if (!m) return;
  e.preventDefault();
  drive(m[0], m[1]);
});

document.getElementById("scan").addEventListener("click", () => {
  scanPoints = demo.scan();
  draw();
});
document.getElementById("relocalize").addEventListener("click", () => {
  demo.relocalize();
  estimate = null;
  draw();
});
document.getElementById("clear").addEventListener("click", () => {
  demo.clear_obstacles();
  buildMapImage();
  replan();
  draw();
});
showParticles.addEventListener("change", draw);
showScan.addEventListener("change", draw);

await init();
demo = new Demo(1n);
scale = canvas.width / (demo.width() * demo.resolution());
heightM = demo.height() * demo.resolution();
buildMapImage();
scanPoints = demo.scan();
draw();
