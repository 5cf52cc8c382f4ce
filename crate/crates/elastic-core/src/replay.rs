//! Fixed-capacity experience ring with uniform sampling.
//!
//! Transitions store the raw task reward and the executed duration; shaping
//! is applied at sampling time with the parameters current at that moment,
//! unless the transition carries a literal shaped value stored at
//! collection (the opt-in storage mode).
//!
//! `done` marks states that terminate the return (success or leaving the
//! track). Episodes cut off by the step limit are truncations, not
//! terminals, and bootstrap as usual.

use alloc::string::ToString;
use alloc::vec::Vec;

use rand::Rng;

use crate::net::CheckpointError;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub controls: [f64; 3],
    pub duration: f64,
    pub r_t: f64,
    /// Shaped reward frozen at collection; `None` means reshape on sampling.
    pub shaped: Option<f64>,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    data: Vec<Transition>,
    /// Next slot to overwrite once the ring is full.
    head: usize,
    /// Total transitions ever pushed.
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity");
        ReplayBuffer { capacity, data: Vec::new(), head: 0, pushed: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
        self.pushed += 1;
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.data[i]
    }

    /// Uniform sample without replacement.
    pub fn sample<'a, R: Rng>(&'a self, batch: usize, rng: &mut R) -> Vec<&'a Transition> {
        assert!(batch <= self.data.len(), "batch larger than buffer");
        rand::seq::index::sample(rng, self.data.len(), batch)
            .iter()
            .map(|i| &self.data[i])
            .collect()
    }

    /// Serialize the full ring (slot order and head position included), so a
    /// restored buffer replays identically.
    pub fn encode_state(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.capacity as u64).to_le_bytes());
        out.extend_from_slice(&(self.head as u64).to_le_bytes());
        out.extend_from_slice(&self.pushed.to_le_bytes());
        out.extend_from_slice(&(self.data.len() as u64).to_le_bytes());
        for t in &self.data {
            t.encode_into(out);
        }
    }

    pub fn decode_state(bytes: &[u8], pos: &mut usize) -> Result<Self, CheckpointError> {
        let capacity = take_u64(bytes, pos)? as usize;
        let head = take_u64(bytes, pos)? as usize;
        let pushed = take_u64(bytes, pos)?;
        let len = take_u64(bytes, pos)? as usize;
        if capacity == 0 || len > capacity || (len == capacity && head >= capacity) || (len < capacity && head != 0) {
            return Err(CheckpointError::Malformed("replay ring geometry".to_string()));
        }
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(Transition::decode_from(bytes, pos)?);
        }
        Ok(ReplayBuffer { capacity, data, head, pushed })
    }
}

impl Transition {
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.obs.len() as u32).to_le_bytes());
        for v in &self.obs {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.controls {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.duration.to_le_bytes());
        out.extend_from_slice(&self.r_t.to_le_bytes());
        match self.shaped {
            Some(s) => {
                out.push(1);
                out.extend_from_slice(&s.to_le_bytes());
            }
            None => out.push(0),
        }
        out.extend_from_slice(&(self.next_obs.len() as u32).to_le_bytes());
        for v in &self.next_obs {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(self.done as u8);
    }

    pub fn decode_from(bytes: &[u8], pos: &mut usize) -> Result<Self, CheckpointError> {
        let obs = take_vec(bytes, pos)?;
        let controls = [take_f64(bytes, pos)?, take_f64(bytes, pos)?, take_f64(bytes, pos)?];
        let duration = take_f64(bytes, pos)?;
        let r_t = take_f64(bytes, pos)?;
        let shaped = match take_u8(bytes, pos)? {
            0 => None,
            1 => Some(take_f64(bytes, pos)?),
            b => return Err(CheckpointError::Malformed(alloc::format!("shaped flag byte {b}"))),
        };
        let next_obs = take_vec(bytes, pos)?;
        let done = match take_u8(bytes, pos)? {
            0 => false,
            1 => true,
            b => return Err(CheckpointError::Malformed(alloc::format!("done flag byte {b}"))),
        };
        Ok(Transition { obs, controls, duration, r_t, shaped, next_obs, done })
    }
}

pub(crate) fn take_u8(bytes: &[u8], pos: &mut usize) -> Result<u8, CheckpointError> {
    let b = *bytes.get(*pos).ok_or(CheckpointError::Truncated)?;
    *pos += 1;
    Ok(b)
}

pub(crate) fn take_u64(bytes: &[u8], pos: &mut usize) -> Result<u64, CheckpointError> {
    let end = pos.checked_add(8).ok_or(CheckpointError::Truncated)?;
    let chunk = bytes.get(*pos..end).ok_or(CheckpointError::Truncated)?;
    *pos = end;
    Ok(u64::from_le_bytes(chunk.try_into().unwrap()))
}

pub(crate) fn take_f64(bytes: &[u8], pos: &mut usize) -> Result<f64, CheckpointError> {
    Ok(f64::from_bits(take_u64(bytes, pos)?))
}

pub(crate) fn take_vec(bytes: &[u8], pos: &mut usize) -> Result<Vec<f64>, CheckpointError> {
    let end = pos.checked_add(4).ok_or(CheckpointError::Truncated)?;
    let chunk = bytes.get(*pos..end).ok_or(CheckpointError::Truncated)?;
    *pos = end;
    let len = u32::from_le_bytes(chunk.try_into().unwrap()) as usize;
    let mut v = Vec::with_capacity(len);
    for _ in 0..len {
        v.push(take_f64(bytes, pos)?);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(tag: f64) -> Transition {
        Transition {
            obs: vec![tag, tag + 0.5],
            controls: [0.1, -0.2, 0.3],
            duration: 0.05,
            r_t: tag / 10.0,
            shaped: if tag as i64 % 2 == 0 { Some(tag * 2.0) } else { None },
            next_obs: vec![tag + 1.0, tag + 1.5],
            done: tag as i64 % 3 == 0,
        }
    }

    #[test]
    fn ring_overwrites_oldest_first() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..3 {
            b.push(t(i as f64));
        }
        assert_eq!(b.len(), 3);
        b.push(t(3.0));
        // Slot 0 held the oldest item and gets replaced in place.
        assert_eq!(b.get(0).obs[0], 3.0);
        assert_eq!(b.get(1).obs[0], 1.0);
        assert_eq!(b.len(), 3);
        assert_eq!(b.pushed(), 4);
        b.push(t(4.0));
        assert_eq!(b.get(1).obs[0], 4.0);
    }

    #[test]
    fn sampling_is_without_replacement_and_seeded() {
        let mut b = ReplayBuffer::new(64);
        for i in 0..50 {
            b.push(t(i as f64));
        }
        let s1: Vec<f64> = b.sample(20, &mut crate::rng::stream(7, 1)).iter().map(|t| t.obs[0]).collect();
        let s2: Vec<f64> = b.sample(20, &mut crate::rng::stream(7, 1)).iter().map(|t| t.obs[0]).collect();
        assert_eq!(s1, s2, "same stream, same sample");
        let mut seen = s1.clone();
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        seen.dedup();
        assert_eq!(seen.len(), 20, "no repeats");
    }

    #[test]
    #[should_panic(expected = "batch larger than buffer")]
    fn oversized_batch_panics() {
        let mut b = ReplayBuffer::new(8);
        b.push(t(1.0));
        let _ = b.sample(2, &mut crate::rng::stream(1, 1));
    }

    #[test]
    fn state_round_trip_is_exact() {
        let mut b = ReplayBuffer::new(4);
        for i in 0..7 {
            b.push(t(i as f64));
        }
        let mut bytes = Vec::new();
        b.encode_state(&mut bytes);
        let mut pos = 0;
        let r = ReplayBuffer::decode_state(&bytes, &mut pos).unwrap();
        assert_eq!(pos, bytes.len(), "consumed everything");
        assert_eq!(r.capacity(), 4);
        assert_eq!(r.len(), 4);
        assert_eq!(r.pushed(), 7);
        for i in 0..4 {
            assert_eq!(r.get(i), b.get(i));
        }
        // Both rings must continue identically.
        let mut b2 = b.clone();
        let mut r2 = r;
        b2.push(t(99.0));
        r2.push(t(99.0));
        for i in 0..4 {
            assert_eq!(r2.get(i), b2.get(i));
        }
    }

    #[test]
    fn truncated_state_is_rejected() {
        let mut b = ReplayBuffer::new(2);
        b.push(t(1.0));
        let mut bytes = Vec::new();
        b.encode_state(&mut bytes);
        for cut in [0, 8, 31, bytes.len() - 1] {
            let mut pos = 0;
            assert!(ReplayBuffer::decode_state(&bytes[..cut], &mut pos).is_err(), "cut {cut}");
        }
    }
}
