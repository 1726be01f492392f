use std::fmt;
use std::str::FromStr;

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RequestMethod {
    Get,
    GetJson,
    Post,
    PostJson,
}

impl RequestMethod {
    pub const ALL: [RequestMethod; 4] =
        [RequestMethod::Get, RequestMethod::GetJson, RequestMethod::Post, RequestMethod::PostJson];

    pub fn is_json(self) -> bool {
        matches!(self, RequestMethod::GetJson | RequestMethod::PostJson)
    }

    pub fn name(self) -> &'static str {
        match self {
            RequestMethod::Get => "get",
            RequestMethod::GetJson => "get-json",
            RequestMethod::Post => "post",
            RequestMethod::PostJson => "post-json",
        }
    }
}

impl fmt::Display for RequestMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RequestMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s) || m.name().replace('-', "_").eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown request method `{s}`"))
    }
}

/// Characters escaped in non-JSON parameters. Spaces, `+`, `=` and quotes
/// travel raw, the way they appear in hand-written injection strings.
const QUERY_COMPONENT: &AsciiSet = &CONTROLS.add(b'#').add(b'&').add(b'%');

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("percent-decoded bytes are not valid UTF-8")]
    Utf8,
    #[error("invalid JSON string body: {0}")]
    Json(String),
}

/// Encode payload text the way it travels inside a request parameter.
pub fn adapt_for_method(payload_text: &str, method: RequestMethod) -> String {
    if method.is_json() {
        let quoted = serde_json::to_string(payload_text).expect("strings always serialize");
        quoted[1..quoted.len() - 1].to_string()
    } else {
        utf8_percent_encode(payload_text, QUERY_COMPONENT).to_string()
    }
}

/// Inverse of [`adapt_for_method`].
pub fn decode_wire(wire: &str, method: RequestMethod) -> Result<String, DecodeError> {
    if method.is_json() {
        serde_json::from_str::<String>(&format!("\"{wire}\"")).map_err(|e| DecodeError::Json(e.to_string()))
    } else {
        percent_decode_str(wire).decode_utf8().map(|c| c.into_owned()).map_err(|_| DecodeError::Utf8)
    }
}
