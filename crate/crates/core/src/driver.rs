//! Runs a [`Session`] against a command channel, pacing ticks by mode.
//!
//! Running sessions tick as fast as the output sink accepts frames; slow
//! motion ticks once per `slow_tick_millis`; idle and paused sessions block
//! until a command arrives.

use std::sync::mpsc::{Receiver, RecvTimeoutError, TryRecvError};
use std::time::{Duration, Instant};

use crate::session::{Mode, ServerMessage, Session, SessionCommand};

/// Why [`run`] returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    /// The command channel closed.
    Disconnected,
    /// The sink refused a message.
    SinkClosed,
}

/// Drives `session` until the command channel closes or `emit` returns false.
/// Rejected commands are reported through `emit` as error messages.
pub fn run<F>(session: &mut Session, commands: &Receiver<SessionCommand>, mut emit: F) -> Stop
where
    F: FnMut(ServerMessage) -> bool,
{
    let mut next_slow_tick = Instant::now();
    loop {
        let cmd = match session.mode() {
            Mode::Idle | Mode::Paused => match commands.recv() {
                Ok(cmd) => Some(cmd),
                Err(_) => return Stop::Disconnected,
            },
            Mode::Running => match commands.try_recv() {
                Ok(cmd) => Some(cmd),
                Err(TryRecvError::Empty) => None,
                Err(TryRecvError::Disconnected) => return Stop::Disconnected,
            },
            Mode::SlowMotion => {
                let wait = next_slow_tick.saturating_duration_since(Instant::now());
                match commands.recv_timeout(wait) {
                    Ok(cmd) => Some(cmd),
                    Err(RecvTimeoutError::Timeout) => None,
                    Err(RecvTimeoutError::Disconnected) => return Stop::Disconnected,
                }
            }
        };

        let messages = match cmd {
            Some(cmd) => {
                let entering_slow = matches!(cmd, SessionCommand::SlowMotionOn);
                let out = match session.handle(cmd) {
                    Ok(out) => out,
                    Err(err) => vec![ServerMessage::error(&err, session.epoch())],
                };
                if entering_slow && session.mode() == Mode::SlowMotion {
                    next_slow_tick = Instant::now();
                }
                out
            }
            None => {
                if session.mode() == Mode::SlowMotion {
                    next_slow_tick = Instant::now() + Duration::from_millis(session.options().slow_tick_millis);
                }
                session.tick()
            }
        };
        for msg in messages {
            if !emit(msg) {
                return Stop::SinkClosed;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::mpsc;
    use std::thread;

    use super::*;
    use crate::distributions::Preset;
    use crate::gan::GanConfig;
    use crate::session::SessionOptions;

    fn session(opts: SessionOptions) -> Session {
        Session::new(GanConfig::default(), Preset::Line.into(), 1, opts).unwrap()
    }

    #[test]
    fn stops_when_channel_closes() {
        let (tx, rx) = mpsc::channel();
        tx.send(SessionCommand::StepBoth).unwrap();
        drop(tx);
        let mut s = session(SessionOptions::default());
        let mut seen = Vec::new();
        let stop = run(&mut s, &rx, |m| {
            seen.push(m);
            true
        });
        assert_eq!(stop, Stop::Disconnected);
        assert_eq!(s.epoch(), 1);
        assert!(matches!(seen[0], ServerMessage::Ack(_)));
        assert!(matches!(seen[1], ServerMessage::Snapshot(_)));
    }

    #[test]
    fn running_streams_until_sink_closes() {
        let (tx, rx) = mpsc::channel();
        tx.send(SessionCommand::Play).unwrap();
        let mut s = session(SessionOptions::default());
        let mut frames = 0;
        let stop = run(&mut s, &rx, |m| {
            if m.as_snapshot().is_some() {
                frames += 1;
            }
            frames < 5
        });
        assert_eq!(stop, Stop::SinkClosed);
        assert_eq!(s.epoch(), 5);
        drop(tx);
    }

    #[test]
    fn invalid_commands_become_error_frames() {
        let (tx, rx) = mpsc::channel();
        tx.send(SessionCommand::Pause).unwrap();
        drop(tx);
        let mut s = session(SessionOptions::default());
        let mut seen = Vec::new();
        run(&mut s, &rx, |m| {
            seen.push(m);
            true
        });
        match &seen[..] {
            [ServerMessage::Error(e)] => assert_eq!(e.code, "invalid_transition"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn slow_motion_is_paced() {
        let opts = SessionOptions {
            slow_tick_millis: 30,
            ..SessionOptions::default()
        };
        let (tx, rx) = mpsc::channel();
        let handle = thread::spawn(move || {
            let mut s = session(opts);
            let start = Instant::now();
            let mut phases = 0;
            run(&mut s, &rx, |m| {
                if m.as_snapshot().is_some_and(|s| s.slow_phase.is_some()) {
                    phases += 1;
                }
                phases < 4
            });
            start.elapsed()
        });
        tx.send(SessionCommand::SlowMotionOn).unwrap();
        let elapsed = handle.join().unwrap();
        // four phases: the first immediately, then three 30 ms waits
        assert!(elapsed >= Duration::from_millis(90), "{elapsed:?}");
    }
}
