//! Newline-delimited JSON link to a plant in another process.
//!
//! Each request is one [`PlantRequest`] object on a line; the reply is one
//! line holding either a [`Measurement`] or `{"error": "..."}`.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::time::Duration;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Measurement, PlantLink, PlantRequest};

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Reply {
    Ok(Measurement),
    Err { error: String },
}

/// Client side of the link.
#[derive(Debug)]
pub struct TcpPlantClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl TcpPlantClient {
    pub fn connect(addr: impl ToSocketAddrs, timeout: Duration) -> Result<Self> {
        let addr = addr
            .to_socket_addrs()
            .map_err(|e| Error::Transport(format!("resolve: {e}")))?
            .next()
            .ok_or_else(|| Error::Transport("no address to connect to".into()))?;
        let stream = TcpStream::connect_timeout(&addr, timeout)
            .map_err(|e| Error::Transport(format!("connect {addr}: {e}")))?;
        stream
            .set_read_timeout(Some(timeout))
            .and_then(|_| stream.set_write_timeout(Some(timeout)))
            .map_err(|e| Error::Transport(e.to_string()))?;
        let writer = stream
            .try_clone()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(TcpPlantClient {
            reader: BufReader::new(stream),
            writer,
        })
    }
}

impl PlantLink for TcpPlantClient {
    fn exchange(&mut self, request: &PlantRequest) -> Result<Measurement> {
        let mut line = serde_json::to_string(request)?;
        line.push('\n');
        self.writer
            .write_all(line.as_bytes())
            .map_err(|e| Error::Transport(format!("send step {}: {e}", request.step)))?;
        let mut reply = String::new();
        let n = self
            .reader
            .read_line(&mut reply)
            .map_err(|e| Error::Transport(format!("receive step {}: {e}", request.step)))?;
        if n == 0 {
            return Err(Error::Transport("plant closed the connection".into()));
        }
        match serde_json::from_str::<Reply>(&reply)
            .map_err(|e| Error::Transport(format!("malformed reply: {e}")))?
        {
            Reply::Ok(m) => Ok(m),
            Reply::Err { error } => Err(Error::Transport(format!("plant: {error}"))),
        }
    }
}

/// Serves `plant` to connections accepted on `listener`, one at a time,
/// until `max_connections` have been handled (`None`: forever).
pub fn serve_plant<P: PlantLink>(
    listener: &TcpListener,
    plant: &mut P,
    max_connections: Option<usize>,
) -> Result<()> {
    for (i, stream) in listener.incoming().enumerate() {
        let stream = stream?;
        let peer = stream.peer_addr().ok();
        info!("plant connection from {peer:?}");
        if let Err(e) = serve_connection(stream, plant) {
            warn!("plant connection {peer:?} ended: {e}");
        }
        if max_connections.is_some_and(|m| i + 1 >= m) {
            break;
        }
    }
    Ok(())
}

fn serve_connection<P: PlantLink>(stream: TcpStream, plant: &mut P) -> Result<()> {
    let mut writer = stream.try_clone()?;
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<PlantRequest>(&line) {
            Ok(req) => match plant.exchange(&req) {
                Ok(m) => Reply::Ok(m),
                Err(e) => Reply::Err {
                    error: e.to_string(),
                },
            },
            Err(e) => Reply::Err {
                error: format!("bad request: {e}"),
            },
        };
        let mut out = serde_json::to_string(&reply)?;
        out.push('\n');
        writer.write_all(out.as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{ActualSeries, PlantSim, Setpoint};
    use crate::model::SystemSpec;

    #[test]
    fn round_trip_over_loopback() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let spec = SystemSpec::electrolyzers(1);
            let mut plant = PlantSim::new(spec, ActualSeries::new(vec![1.0; 4], 0.025).unwrap());
            serve_plant(&listener, &mut plant, Some(1)).unwrap();
        });
        let mut client = TcpPlantClient::connect(addr, Duration::from_secs(5)).unwrap();
        let req = PlantRequest {
            step: 0,
            setpoints: vec![Setpoint {
                resource: 0,
                state: 2,
                p_input_kw: 2.4,
            }],
            p_grid_kw: None,
        };
        let m = client.exchange(&req).unwrap();
        assert_eq!(m.resources[0].state, 2);
        assert!((m.resources[0].p_output - 1.494).abs() < 1e-12);

        let bad = PlantRequest { step: 99, ..req };
        assert!(matches!(client.exchange(&bad), Err(Error::Transport(_))));
        drop(client);
        server.join().unwrap();
    }

    #[test]
    fn refused_connection_is_a_transport_error() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        assert!(matches!(
            TcpPlantClient::connect(addr, Duration::from_millis(200)),
            Err(Error::Transport(_))
        ));
    }
}
