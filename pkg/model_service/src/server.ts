// HTTP wiring around Service.  Listen address comes from
// MODEL_SERVICE_ADDR ("host:port", port 0 for ephemeral); the binding
// config path is the single CLI argument.

import { createServer, IncomingMessage, ServerResponse } from "node:http";
import { AddressInfo } from "node:net";
import { pathToFileURL } from "node:url";

import { ConfigError, loadConfig, ServiceConfig } from "./bindings.js";
import { Reply, Service } from "./service.js";

function send(res: ServerResponse, reply: Reply): void {
  const data = JSON.stringify(reply.body);
  res.writeHead(reply.status, {
    "Content-Type": "application/json",
    "Content-Length": Buffer.byteLength(data),
  });
  res.end(data);
}

function readBody(
  req: IncomingMessage,
  limit: number,
): Promise<Buffer | "too_large"> {
  return new Promise((resolve, reject) => {
    const chunks: Buffer[] = [];
    let total = 0;
    req.on("data", (chunk: Buffer) => {
      total += chunk.length;
      if (total > limit) {
        resolve("too_large");
        req.destroy();
        return;
      }
      chunks.push(chunk);
    });
    req.on("end", () => resolve(Buffer.concat(chunks)));
    req.on("error", reject);
  });
}

export function makeServer(config: ServiceConfig) {
  const service = new Service(config);
  // base64 inflates by 4/3, plus JSON envelope headroom
  const bodyLimit = Math.ceil(config.max_image_bytes * 1.5) + 4096;

  return createServer(async (req, res) => {
    try {
      if (req.method === "GET" && req.url === "/health") {
        send(res, service.health());
        return;
      }
      if (req.method !== "POST" || (req.url !== "/caption" && req.url !== "/embed")) {
        send(res, { status: 404, body: { error: `no route ${req.method} ${req.url}` } });
        return;
      }
      const raw = await readBody(req, bodyLimit);
      if (raw === "too_large") {
        send(res, { status: 413, body: { error: `request body over ${bodyLimit} bytes` } });
        return;
      }
      let body: unknown;
      try {
        body = JSON.parse(raw.toString("utf-8"));
      } catch {
        send(res, { status: 400, body: { error: "body is not valid JSON" } });
        return;
      }
      const reply =
        req.url === "/caption" ? await service.caption(body) : await service.embed(body);
      send(res, reply);
    } catch {
      if (!res.headersSent) {
        send(res, { status: 500, body: { error: "internal error" } });
      }
    }
  });
}

function parseAddr(addr: string): { host: string; port: number } {
  const sep = addr.lastIndexOf(":");
  if (sep < 0) {
    return { host: addr, port: 8100 };
  }
  const port = Number(addr.slice(sep + 1));
  if (!Number.isInteger(port) || port < 0 || port > 65535) {
    throw new ConfigError(`bad listen address ${addr}`);
  }
  return { host: addr.slice(0, sep) || "127.0.0.1", port };
}

export function main(argv: string[]): void {
  const configPath = argv[0];
  if (!configPath) {
    process.stderr.write("usage: server.js <bindings.json>\n");
    process.exit(2);
  }
  let config: ServiceConfig;
  try {
    config = loadConfig(configPath);
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    process.exit(2);
  }
  const { host, port } = parseAddr(process.env.MODEL_SERVICE_ADDR ?? "127.0.0.1:8100");
  const server = makeServer(config);
  server.listen(port, host, () => {
    const actual = server.address() as AddressInfo;
    process.stdout.write(`listening on http://${actual.address}:${actual.port}\n`);
  });
  const stop = () => server.close(() => process.exit(0));
  process.on("SIGINT", stop);
  process.on("SIGTERM", stop);
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(process.argv[1]).href;
if (invokedDirectly) {
  main(process.argv.slice(2));
}
