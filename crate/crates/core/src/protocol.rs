//! Message protocol for driving a session from another process or an
//! embedding front-end.
//!
//! Every message is a JSON object tagged by `"type"`. On a byte stream each
//! message is framed by a 4-byte big-endian length prefix. [`Server::handle`]
//! is the in-process equivalent of one request/response exchange.

use std::io::{self, Read, Write};
use std::path::PathBuf;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::engine::{SmudgeSession, StrokeRecord, Tile, TileDiff, Tool};
use crate::error::{Error, Result};
use crate::params::{Params, Segmentation};
use crate::raster::{RasterImage, Rgba};
use crate::select::{CandidateScore, RegionSet, SelectionTrace};
use crate::stroke::StrokeSample;

/// Largest accepted frame body.
pub const MAX_FRAME: u32 = 256 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request {
    /// Loads a PNG from `path` or from base64 `png`, then segments it.
    OpenCanvas {
        #[serde(default)]
        path: Option<PathBuf>,
        #[serde(default)]
        png: Option<String>,
    },
    Segment {
        #[serde(flatten)]
        segmentation: Segmentation,
    },
    /// Partial parameter update; only the given fields change.
    SetParams { params: serde_json::Value },
    BeginStroke {
        #[serde(default)]
        tool: Tool,
    },
    StrokeSample {
        x: f64,
        y: f64,
        #[serde(default)]
        t_ms: f64,
        #[serde(default)]
        pressure: Option<f64>,
    },
    EndStroke,
    Undo,
    /// Writes the canvas to `path`, or returns it inline when absent.
    Export {
        #[serde(default)]
        path: Option<PathBuf>,
    },
    GetOverlay,
}

/// Tile with its pixels as base64 RGBA bytes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireTile {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub pixels: String,
}

impl From<&Tile> for WireTile {
    fn from(t: &Tile) -> Self {
        let bytes: Vec<u8> = t.pixels.iter().flat_map(|p| p.0).collect();
        WireTile {
            x: t.x,
            y: t.y,
            w: t.w,
            h: t.h,
            pixels: B64.encode(bytes),
        }
    }
}

impl TryFrom<&WireTile> for Tile {
    type Error = Error;

    fn try_from(t: &WireTile) -> Result<Tile> {
        let bytes = B64
            .decode(&t.pixels)
            .map_err(|e| Error::Malformed(format!("tile pixels: {e}")))?;
        if bytes.len() != (t.w as usize) * (t.h as usize) * 4 {
            return Err(Error::Malformed("tile pixel count does not match its size".into()));
        }
        Ok(Tile {
            x: t.x,
            y: t.y,
            w: t.w,
            h: t.h,
            pixels: bytes.chunks_exact(4).map(|c| Rgba([c[0], c[1], c[2], c[3]])).collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Response {
    Canvas {
        width: u32,
        height: u32,
        regions: usize,
    },
    TileDiff {
        tiles: Vec<WireTile>,
        clamped: bool,
    },
    Selection {
        t: u64,
        covered: RegionSet,
        base: RegionSet,
        selected: RegionSet,
        scores: Vec<CandidateScore>,
    },
    Overlay {
        t: u64,
        covered: RegionSet,
        selected: RegionSet,
        scores: Vec<CandidateScore>,
        /// Region label of every pixel in raster order, as base64 little-endian u32.
        labels: String,
    },
    Stroke {
        record: StrokeRecord,
    },
    Image {
        width: u32,
        height: u32,
        png: String,
    },
    Ack {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        message: Option<String>,
    },
    Error {
        message: String,
        input_error: bool,
    },
}

impl Response {
    pub fn tile_diff(diff: &TileDiff) -> Self {
        Response::TileDiff {
            tiles: diff.tiles.iter().map(WireTile::from).collect(),
            clamped: diff.clamped,
        }
    }

    fn selection(t: &SelectionTrace) -> Self {
        Response::Selection {
            t: t.t,
            covered: t.covered.clone(),
            base: t.base.clone(),
            selected: t.selected.clone(),
            scores: t.candidate_scores.clone(),
        }
    }

    fn ack(message: impl Into<String>) -> Self {
        Response::Ack {
            message: Some(message.into()),
        }
    }

    /// Decodes a `tile_diff` response back into engine tiles.
    pub fn to_diff(&self) -> Result<Option<TileDiff>> {
        match self {
            Response::TileDiff { tiles, clamped } => Ok(Some(TileDiff {
                tiles: tiles.iter().map(Tile::try_from).collect::<Result<_>>()?,
                clamped: *clamped,
            })),
            _ => Ok(None),
        }
    }
}

/// Protocol state around at most one open session.
#[derive(Default)]
pub struct Server {
    session: Option<SmudgeSession>,
    params: Params,
    pending_tool: Option<Tool>,
    stroke_started: bool,
}

impl Server {
    pub fn new(params: Params) -> Self {
        Server {
            params,
            ..Default::default()
        }
    }

    pub fn session(&self) -> Option<&SmudgeSession> {
        self.session.as_ref()
    }

    fn session_mut(&mut self) -> Result<&mut SmudgeSession> {
        self.session
            .as_mut()
            .ok_or_else(|| Error::Session("no canvas is open".into()))
    }

    /// Processes one request. Stroke samples answer with a `selection`
    /// followed by a `tile_diff`; every other request yields one response.
    pub fn handle(&mut self, req: Request) -> Vec<Response> {
        match self.dispatch(req) {
            Ok(r) => r,
            Err(e) => vec![Response::Error {
                input_error: e.is_input_error(),
                message: e.to_string(),
            }],
        }
    }

    fn dispatch(&mut self, req: Request) -> Result<Vec<Response>> {
        Ok(match req {
            Request::OpenCanvas { path, png } => {
                if self.pending_tool.is_some() {
                    return Err(Error::Session("cannot open a canvas while a stroke is active".into()));
                }
                let canvas = match (path, png) {
                    (Some(p), None) => RasterImage::load_png(p)?,
                    (None, Some(b)) => RasterImage::decode_png(
                        &B64.decode(b).map_err(|e| Error::Malformed(format!("png: {e}")))?,
                    )?,
                    _ => return Err(Error::Malformed("open_canvas needs exactly one of `path` or `png`".into())),
                };
                let s = SmudgeSession::open(canvas, self.params.clone())?;
                let r = Response::Canvas {
                    width: s.canvas().width(),
                    height: s.canvas().height(),
                    regions: s.map().len(),
                };
                self.session = Some(s);
                vec![r]
            }
            Request::Segment { segmentation } => {
                let params = Params {
                    segmentation,
                    ..self.params.clone()
                };
                params.validate()?;
                let s = self.session_mut()?;
                s.set_params(params.clone())?;
                s.resegment()?;
                let regions = s.map().len();
                self.params = params;
                vec![Response::ack(format!("{regions} regions"))]
            }
            Request::SetParams { params } => {
                if self.pending_tool.is_some() {
                    return Err(Error::Session("cannot change parameters while a stroke is active".into()));
                }
                let merged = self.params.merged(&params)?;
                if let Some(s) = self.session.as_mut() {
                    s.set_params(merged.clone())?;
                }
                self.params = merged;
                vec![Response::Ack { message: None }]
            }
            Request::BeginStroke { tool } => {
                self.session_mut()?;
                if self.pending_tool.is_some() {
                    return Err(Error::Session("a stroke is already active".into()));
                }
                self.pending_tool = Some(tool);
                self.stroke_started = false;
                vec![Response::Ack { message: None }]
            }
            Request::StrokeSample { x, y, t_ms, pressure } => {
                let tool = self
                    .pending_tool
                    .ok_or_else(|| Error::Session("stroke_sample outside a stroke".into()))?;
                let sample = StrokeSample { x, y, t_ms, pressure };
                let started = self.stroke_started;
                let s = self.session_mut()?;
                let adv = if started {
                    s.advance(sample)?
                } else {
                    s.begin_stroke(tool, sample)?
                };
                self.stroke_started = true;
                vec![Response::selection(&adv.selection), Response::tile_diff(&adv.diff)]
            }
            Request::EndStroke => {
                let tool = self
                    .pending_tool
                    .take()
                    .ok_or_else(|| Error::Session("no active stroke".into()))?;
                if !std::mem::take(&mut self.stroke_started) {
                    return Ok(vec![Response::Stroke {
                        record: StrokeRecord { tool, samples: Vec::new() },
                    }]);
                }
                let fin = self.session_mut()?.end_stroke()?;
                vec![Response::Stroke { record: fin.record }]
            }
            Request::Undo => match self.session_mut()?.undo()? {
                Some(diff) => vec![Response::tile_diff(&diff)],
                None => vec![Response::ack("nothing to undo")],
            },
            Request::Export { path } => {
                let s = self.session_mut()?;
                match path {
                    Some(p) => {
                        s.canvas().save_png(&p)?;
                        vec![Response::ack(format!("wrote {}", p.display()))]
                    }
                    None => vec![Response::Image {
                        width: s.canvas().width(),
                        height: s.canvas().height(),
                        png: B64.encode(s.canvas().encode_png()?),
                    }],
                }
            }
            Request::GetOverlay => {
                let s = self.session_mut()?;
                let o = s.overlay();
                let labels: Vec<u8> = s.map().labels().iter().flat_map(|l| l.to_le_bytes()).collect();
                vec![Response::Overlay {
                    t: o.t,
                    covered: o.covered.clone(),
                    selected: o.selected.clone(),
                    scores: o.scores.clone(),
                    labels: B64.encode(labels),
                }]
            }
        })
    }

    /// Serves framed requests until the reader reaches end of stream.
    pub fn serve(&mut self, mut input: impl Read, mut output: impl Write) -> Result<()> {
        loop {
            let body = match read_frame(&mut input) {
                Ok(Some(b)) => b,
                Ok(None) => return Ok(()),
                Err(e) => return Err(Error::io("<input>", e)),
            };
            let responses = match serde_json::from_slice::<Request>(&body) {
                Ok(req) => self.handle(req),
                Err(e) => vec![Response::Error {
                    message: format!("bad request: {e}"),
                    input_error: true,
                }],
            };
            for r in &responses {
                write_message(&mut output, r)?;
            }
            output.flush().map_err(|e| Error::io("<output>", e))?;
        }
    }
}

/// Reads one length-prefixed frame; `None` on a clean end of stream.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let n = u32::from_be_bytes(len);
    if n > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {n} bytes is too large")));
    }
    let mut body = vec![0u8; n as usize];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}

pub fn write_frame(w: &mut impl Write, body: &[u8]) -> io::Result<()> {
    let n = u32::try_from(body.len())
        .ok()
        .filter(|&n| n <= MAX_FRAME)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&n.to_be_bytes())?;
    w.write_all(body)
}

/// Serializes and frames any message.
pub fn write_message(w: &mut impl Write, msg: &impl Serialize) -> Result<()> {
    let body = serde_json::to_vec(msg)?;
    write_frame(w, &body).map_err(|e| Error::io("<output>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn png_b64(img: &RasterImage) -> String {
        B64.encode(img.encode_png().unwrap())
    }

    fn canvas() -> RasterImage {
        RasterImage::from_fn(96, 64, |x, _| if x < 48 { Rgba::opaque(250, 0, 0) } else { Rgba::opaque(0, 0, 250) }).unwrap()
    }

    #[test]
    fn request_json_shapes() {
        let r: Request = serde_json::from_str(r#"{"type": "stroke_sample", "x": 1, "y": 2}"#).unwrap();
        assert_eq!(
            r,
            Request::StrokeSample {
                x: 1.0,
                y: 2.0,
                t_ms: 0.0,
                pressure: None
            }
        );
        let r: Request = serde_json::from_str(r#"{"type": "segment", "method": "flat"}"#).unwrap();
        assert_eq!(r, Request::Segment { segmentation: Segmentation::Flat });
        let r: Request = serde_json::from_str(
            r#"{"type": "segment", "method": "meanshift", "spatial_bandwidth": 4, "color_bandwidth": 9, "min_region": 3}"#,
        )
        .unwrap();
        assert!(matches!(r, Request::Segment { segmentation: Segmentation::MeanShift(_) }));
        let r: Request = serde_json::from_str(r#"{"type": "begin_stroke", "tool": "ts"}"#).unwrap();
        assert_eq!(r, Request::BeginStroke { tool: Tool::Ts });
        assert!(serde_json::from_str::<Request>(r#"{"type": "paint"}"#).is_err());
    }

    #[test]
    fn stroke_lifecycle_over_handle() {
        let mut srv = Server::default();
        let img = canvas();
        let r = srv.handle(Request::OpenCanvas {
            path: None,
            png: Some(png_b64(&img)),
        });
        assert_eq!(
            r,
            vec![Response::Canvas {
                width: 96,
                height: 64,
                regions: 2
            }]
        );
        let mut mirror = img.clone();
        srv.handle(Request::BeginStroke { tool: Tool::Bs });
        for i in 0..12 {
            let out = srv.handle(Request::StrokeSample {
                x: 30.0 + 3.0 * i as f64,
                y: 32.0,
                t_ms: i as f64,
                pressure: None,
            });
            assert_eq!(out.len(), 2);
            assert!(matches!(out[0], Response::Selection { .. }));
            out[1].to_diff().unwrap().unwrap().apply(&mut mirror).unwrap();
        }
        let out = srv.handle(Request::EndStroke);
        let Response::Stroke { record } = &out[0] else {
            panic!("{out:?}")
        };
        assert_eq!(record.samples.len(), 12);
        assert_eq!(&mirror, srv.session().unwrap().canvas());
        assert_ne!(mirror, img);

        let out = srv.handle(Request::Undo);
        out[0].to_diff().unwrap().unwrap().apply(&mut mirror).unwrap();
        assert_eq!(mirror, img);
        assert_eq!(srv.handle(Request::Undo), vec![Response::ack("nothing to undo")]);
    }

    #[test]
    fn mid_stroke_parameter_changes_are_rejected() {
        let mut srv = Server::default();
        srv.handle(Request::OpenCanvas {
            path: None,
            png: Some(png_b64(&canvas())),
        });
        srv.handle(Request::BeginStroke { tool: Tool::Ss });
        let out = srv.handle(Request::SetParams {
            params: serde_json::json!({"gamma": 0.5}),
        });
        assert!(matches!(&out[0], Response::Error { input_error: false, .. }));
        srv.handle(Request::EndStroke);
        let out = srv.handle(Request::SetParams {
            params: serde_json::json!({"gamma": 0.5}),
        });
        assert_eq!(out, vec![Response::Ack { message: None }]);
        assert_eq!(srv.session().unwrap().params().gamma, 0.5);
    }

    #[test]
    fn errors_without_canvas() {
        let mut srv = Server::default();
        for req in [Request::Undo, Request::GetOverlay, Request::BeginStroke { tool: Tool::Ss }] {
            assert!(matches!(srv.handle(req)[0], Response::Error { .. }));
        }
    }

    #[test]
    fn overlay_carries_the_label_grid() {
        let mut srv = Server::default();
        srv.handle(Request::OpenCanvas {
            path: None,
            png: Some(png_b64(&canvas())),
        });
        srv.handle(Request::BeginStroke { tool: Tool::Ss });
        let sel = srv.handle(Request::StrokeSample {
            x: 10.0,
            y: 10.0,
            t_ms: 0.0,
            pressure: None,
        });
        let Response::Selection { selected, .. } = &sel[0] else { panic!() };
        let out = srv.handle(Request::GetOverlay);
        let Response::Overlay { selected: o, labels, .. } = &out[0] else { panic!() };
        assert_eq!(o, selected);
        assert_eq!(B64.decode(labels).unwrap().len(), 96 * 64 * 4);
    }

    #[test]
    fn framed_serve_loop() {
        let mut input = Vec::new();
        let img = canvas();
        for req in [
            Request::OpenCanvas {
                path: None,
                png: Some(png_b64(&img)),
            },
            Request::Export { path: None },
        ] {
            write_message(&mut input, &req).unwrap();
        }
        write_frame(&mut input, b"{not json").unwrap();
        let mut out = Vec::new();
        Server::default().serve(&input[..], &mut out).unwrap();
        let mut cursor = &out[..];
        let mut msgs = Vec::new();
        while let Some(f) = read_frame(&mut cursor).unwrap() {
            msgs.push(serde_json::from_slice::<Response>(&f).unwrap());
        }
        assert_eq!(msgs.len(), 3);
        let Response::Image { png, .. } = &msgs[1] else { panic!() };
        assert_eq!(RasterImage::decode_png(&B64.decode(png).unwrap()).unwrap(), img);
        assert!(matches!(msgs[2], Response::Error { input_error: true, .. }));
    }

    #[test]
    fn oversized_frames_are_refused() {
        let bytes = (MAX_FRAME + 1).to_be_bytes();
        assert!(read_frame(&mut &bytes[..]).is_err());
        assert!(read_frame(&mut &[][..]).unwrap().is_none());
    }
}
