//! Versioned JSON wire types. Every request and response carries `"v": 1`.

use revise_core::click::Click;
use revise_core::geometry::{MaskRle, Point};
use serde::{Deserialize, Serialize};

pub const API_VERSION: u32 = 1;

/// Display range of the uploaded image, kept for clients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplayWindow {
    pub level: f64,
    pub width: f64,
}

/// Row-major image with intensities normalised to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePayload {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub v: u32,
    pub image: ImagePayload,
    pub initial_mask: MaskRle,
    #[serde(default)]
    pub window: Option<DisplayWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionResponse {
    pub v: u32,
    pub session_id: String,
    /// Ordered boundary polygons of the initial mask.
    pub contour: Vec<Vec<Point>>,
    pub mask: MaskRle,
    pub empty_mask: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickRequest {
    pub v: u32,
    /// Signed so that off-image clicks are reported, not rejected as JSON.
    pub row: i64,
    pub col: i64,
}

/// Time spent serving one revision, milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// The network forward pass alone.
    pub model_ms: f64,
    /// Click encoding, input assembly and thresholding.
    pub encode_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionResponse {
    pub v: u32,
    pub session_id: String,
    /// Revisions currently applied.
    pub revision: usize,
    pub contour: Vec<Vec<Point>>,
    pub mask: MaskRle,
    pub clicks: Vec<Click>,
    /// Absent for undo, which runs no model.
    pub timing: Option<Timing>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UndoRequest {
    pub v: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub v: u32,
    pub session_id: String,
    pub size: usize,
    pub window: Option<DisplayWindow>,
    pub contour: Vec<Vec<Point>>,
    pub mask: MaskRle,
    pub clicks: Vec<Click>,
    /// Mask before each applied revision, oldest first.
    pub history: Vec<MaskRle>,
    pub created_unix_ms: u64,
    pub updated_unix_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub parameters: usize,
    pub input_size: usize,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub v: u32,
    pub status: String,
    pub sessions: usize,
    pub model: ModelInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub v: u32,
    pub error: String,
    pub message: String,
}
