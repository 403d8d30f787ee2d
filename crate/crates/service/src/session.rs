//! Revision sessions, independent of the transport.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use revise_core::click::{encode_clicks, Click, ClickMap};
use revise_core::geometry::{BinaryMask, Point};
use revise_core::network::{to_mask, RevisionInput, RevisionNet};
use revise_core::Error;

use crate::api::{DisplayWindow, Timing};

pub fn unix_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// One image being revised: the current mask, the clicks applied so far
/// and the mask before each revision.
#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub size: usize,
    pub image: Vec<f32>,
    pub window: Option<DisplayWindow>,
    pub current_mask: BinaryMask,
    pub clicks: Vec<Click>,
    /// `history[i]` is the mask before revision `i`.
    pub history: Vec<BinaryMask>,
    pub created_unix_ms: u64,
    pub updated_unix_ms: u64,
}

impl Session {
    pub fn new(id: String, size: usize, image: Vec<f32>, mask: BinaryMask, window: Option<DisplayWindow>) -> Self {
        let now = unix_ms();
        Self {
            id,
            size,
            image,
            window,
            current_mask: mask,
            clicks: Vec::new(),
            history: Vec::new(),
            created_unix_ms: now,
            updated_unix_ms: now,
        }
    }

    fn touch(&mut self) {
        self.updated_unix_ms = unix_ms();
    }

    /// Click map the model sees for the current click list.
    pub fn click_map(&self) -> Result<ClickMap<f32>, Error> {
        encode_clicks(&self.clicks, (self.size, self.size))
    }

    /// Appends a click and revises the mask with every click so far.
    pub fn apply_click(&mut self, model: &RevisionNet<f32>, row: i64, col: i64) -> Result<Timing, Error> {
        let n = self.size as i64;
        if row < 0 || col < 0 || row >= n || col >= n {
            return Err(Error::OutOfBounds {
                row,
                col,
                height: self.size,
                width: self.size,
            });
        }
        let start = Instant::now();
        let mut clicks = self.clicks.clone();
        clicks.push(Click::new(Point::new(row as usize, col as usize), clicks.len() + 1));
        let map = encode_clicks(&clicks, (self.size, self.size))?;
        let input = RevisionInput::new(&self.image, &self.current_mask, &map)?;
        let encoded = Instant::now();
        let prob = model.forward(&input)?;
        let forwarded = Instant::now();
        let mask = to_mask(&prob);
        let done = Instant::now();

        self.history.push(std::mem::replace(&mut self.current_mask, mask));
        self.clicks = clicks;
        self.touch();
        let ms = |a: Instant, b: Instant| (b - a).as_secs_f64() * 1e3;
        Ok(Timing {
            model_ms: ms(encoded, forwarded),
            encode_ms: ms(start, encoded) + ms(forwarded, done),
        })
    }

    /// Reverts the latest revision. Returns `false` when there is none.
    pub fn undo(&mut self) -> bool {
        match self.history.pop() {
            Some(previous) => {
                self.current_mask = previous;
                self.clicks.pop();
                self.touch();
                true
            }
            None => false,
        }
    }
}
