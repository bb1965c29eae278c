use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use tiny_http::{Header, Method, Request, Response, Server};

use super::wire::{
    self, NextTokenRequest, NextTokenResponse, PerplexityRequest, PerplexityResponse,
};
use super::wire::{TriggerRequest, TriggerResponse};
use super::LanguageModel;
use crate::bandit::TriggerPredictor;
use crate::error::{Error, Result};

const WORKERS: usize = 4;

/// HTTP server exposing a [`LanguageModel`] (and optionally a trigger
/// predictor) over the remote provider protocol. Stops when dropped.
pub struct LoopbackServer {
    server: Arc<Server>,
    addr: SocketAddr,
    workers: Vec<JoinHandle<()>>,
}

struct Backend {
    model: Arc<dyn LanguageModel>,
    trigger: Option<Arc<dyn TriggerPredictor>>,
}

impl LoopbackServer {
    /// Binds `addr` (use port 0 for an ephemeral port) and starts serving.
    pub fn start(
        addr: &str,
        model: Arc<dyn LanguageModel>,
        trigger: Option<Arc<dyn TriggerPredictor>>,
    ) -> Result<Self> {
        let server = Server::http(addr)
            .map_err(|e| Error::RemoteUnreachable(format!("bind {addr}: {e}")))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| Error::RemoteUnreachable("server bound to a non-IP address".into()))?;
        let server = Arc::new(server);
        let backend = Arc::new(Backend { model, trigger });
        let workers = (0..WORKERS)
            .map(|_| {
                let server = Arc::clone(&server);
                let backend = Arc::clone(&backend);
                std::thread::spawn(move || {
                    for req in server.incoming_requests() {
                        backend.handle(req);
                    }
                })
            })
            .collect();
        Ok(LoopbackServer {
            server,
            addr,
            workers,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server is stopped from another thread.
    pub fn join(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for LoopbackServer {
    fn drop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Backend {
    fn handle(&self, mut req: Request) {
        let mut body = String::new();
        let outcome = if *req.method() != Method::Post {
            Err((405, "POST only".to_string()))
        } else if let Err(e) = req.as_reader().read_to_string(&mut body) {
            Err((400, format!("unreadable body: {e}")))
        } else {
            self.route(req.url(), &body)
        };
        let (status, text) = match outcome {
            Ok(text) => (200, text),
            Err((status, msg)) => (status, serde_json::json!({ "error": msg }).to_string()),
        };
        let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
        let _ = req.respond(
            Response::from_string(text)
                .with_status_code(status)
                .with_header(header),
        );
    }

    fn route(&self, path: &str, body: &str) -> std::result::Result<String, (u16, String)> {
        let bad = |e: serde_json::Error| (400, e.to_string());
        let failed = |e: Error| (500, e.to_string());
        match path {
            wire::NEXT_TOKEN_PATH => {
                let r: NextTokenRequest = serde_json::from_str(body).map_err(bad)?;
                let d = self
                    .model
                    .next_token_distribution(&r.prefix, r.top_k)
                    .map_err(failed)?;
                Ok(serde_json::to_string(&NextTokenResponse::from(&d)).expect("serializable"))
            }
            wire::PERPLEXITY_PATH => {
                let r: PerplexityRequest = serde_json::from_str(body).map_err(bad)?;
                let ppl = self
                    .model
                    .sequence_perplexity(&r.context, &r.target)
                    .map_err(failed)?;
                let resp = PerplexityResponse {
                    ppl: ppl.is_finite().then_some(ppl),
                };
                Ok(serde_json::to_string(&resp).expect("serializable"))
            }
            wire::TRIGGER_PATH => {
                let trigger = self
                    .trigger
                    .as_ref()
                    .ok_or((404, "no trigger predictor configured".to_string()))?;
                let r: TriggerRequest = serde_json::from_str(body).map_err(bad)?;
                let p = trigger.likelihood(&r.prefix).map_err(failed)?;
                Ok(serde_json::to_string(&TriggerResponse { p }).expect("serializable"))
            }
            other => Err((404, format!("unknown path {other}"))),
        }
    }
}
