//! Line-delimited JSON protocol spoken with an external simulator/detector.
//!
//! ```text
//! -> {"hello": 1, "k": 27}
//! <- {"ok": true}
//! -> {"roll": 12.5, "pitch": -3.0, "yaw": 0.25, "model_id": 4}
//! <- {"actual": [[x, y] | null, ...], "predicted": [[x, y], ...], "face_width": w, "face_height": h}
//! ```
//!
//! One record per line, UTF-8. Anything else is a protocol error.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::SystemUnderTest;
use crate::error::{Error, Result};
use crate::types::{EvaluatedTestCase, GroundTruth, ImageCharacteristics, Point2D, Prediction};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hello {
    pub hello: u32,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelloReply {
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Request {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub model_id: u32,
}

impl From<&ImageCharacteristics> for Request {
    fn from(ic: &ImageCharacteristics) -> Self {
        Self { roll: ic.roll, pitch: ic.pitch, yaw: ic.yaw, model_id: ic.model_id }
    }
}

impl From<&Request> for ImageCharacteristics {
    fn from(r: &Request) -> Self {
        ImageCharacteristics::new(r.roll, r.pitch, r.yaw, r.model_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Response {
    pub actual: Vec<Option<[f64; 2]>>,
    pub predicted: Vec<[f64; 2]>,
    pub face_width: f64,
    pub face_height: f64,
}

impl Response {
    pub fn from_test(test: &EvaluatedTestCase) -> Self {
        Self {
            actual: test.truth.positions().iter().map(|p| p.map(Into::into)).collect(),
            predicted: test.prediction.positions().iter().map(|&p| p.into()).collect(),
            face_width: test.truth.face_width(),
            face_height: test.truth.face_height(),
        }
    }

    /// Validates the response against `k` key-points and computes fitness.
    pub fn into_test(self, ic: ImageCharacteristics, k: usize) -> Result<EvaluatedTestCase> {
        if self.actual.len() != k || self.predicted.len() != k {
            return Err(Error::Protocol(format!(
                "expected {k} key-points, got {} actual and {} predicted",
                self.actual.len(),
                self.predicted.len()
            )));
        }
        let truth = GroundTruth::new(
            self.actual.into_iter().map(|p| p.map(Point2D::from)).collect(),
            self.face_width,
            self.face_height,
        )
        .map_err(|e| Error::Protocol(format!("invalid ground truth: {e}")))?;
        let prediction = Prediction::new(self.predicted.into_iter().map(Point2D::from).collect())
            .map_err(|e| Error::Protocol(format!("invalid prediction: {e}")))?;
        EvaluatedTestCase::new(ic, truth, prediction).map_err(|e| Error::Protocol(e.to_string()))
    }
}

pub fn parse_line<T: for<'de> Deserialize<'de>>(line: &str, what: &str) -> Result<T> {
    serde_json::from_str(line.trim_end()).map_err(|e| Error::Protocol(format!("malformed {what} '{}': {e}", line.trim_end())))
}

pub fn write_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> Result<()> {
    let text = serde_json::to_string(value).map_err(|e| Error::Protocol(e.to_string()))?;
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Serves the protocol on `input`/`output`, answering every request by
/// evaluating `sut`. Returns the number of requests served when the input closes.
pub fn serve<R: BufRead, W: Write, S: SystemUnderTest + ?Sized>(sut: &S, input: R, mut output: W) -> Result<u64> {
    let mut lines = input.lines();
    let hello: Hello = match lines.next() {
        Some(line) => parse_line(&line?, "handshake")?,
        None => return Ok(0),
    };
    if hello.hello != PROTOCOL_VERSION || hello.k != sut.key_points() {
        write_line(&mut output, &HelloReply { ok: false })?;
        return Err(Error::Protocol(format!(
            "unsupported handshake {hello:?}, serving k={}",
            sut.key_points()
        )));
    }
    write_line(&mut output, &HelloReply { ok: true })?;
    let mut served = 0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let req: Request = parse_line(&line, "request")?;
        let test = sut.evaluate(&ImageCharacteristics::from(&req))?;
        write_line(&mut output, &Response::from_test(&test))?;
        served += 1;
    }
    Ok(served)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sut::SyntheticSut;

    #[test]
    fn response_round_trip_is_exact() {
        let sut = SyntheticSut::default_plant();
        let ic = ImageCharacteristics::new(-12.345678901234, 17.1, 29.999, 9);
        let test = sut.evaluate(&ic).unwrap();
        let line = serde_json::to_string(&Response::from_test(&test)).unwrap();
        let back: Response = parse_line(&line, "response").unwrap();
        assert_eq!(back.into_test(ic, 27).unwrap(), test);
    }

    #[test]
    fn short_response_is_protocol_error() {
        let r = Response {
            actual: vec![Some([0.0, 0.0]); 3],
            predicted: vec![[0.0, 0.0]; 3],
            face_width: 1.0,
            face_height: 1.0,
        };
        let ic = ImageCharacteristics::new(0.0, 0.0, 0.0, 0);
        assert!(matches!(r.into_test(ic, 27), Err(Error::Protocol(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(parse_line::<HelloReply>(r#"{"ok": true, "extra": 1}"#, "reply").is_err());
        assert!(parse_line::<HelloReply>("not json", "reply").is_err());
    }

    #[test]
    fn serve_loopback_in_process() {
        let sut = SyntheticSut::default_plant();
        let ic = ImageCharacteristics::new(1.0, 2.0, 3.0, 4);
        let mut input = String::new();
        input.push_str(&serde_json::to_string(&Hello { hello: 1, k: 27 }).unwrap());
        input.push('\n');
        input.push_str(&serde_json::to_string(&Request::from(&ic)).unwrap());
        input.push('\n');
        let mut out = Vec::new();
        assert_eq!(serve(&sut, input.as_bytes(), &mut out).unwrap(), 1);
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), r#"{"ok":true}"#);
        let resp: Response = parse_line(lines.next().unwrap(), "response").unwrap();
        assert_eq!(resp.into_test(ic, 27).unwrap(), sut.evaluate(&ic).unwrap());
    }
}
