use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use super::protocol::{RunnerRequest, RunnerResponse};
use crate::error::{Error, Result};

/// What came back for one request.
#[derive(Debug)]
pub(crate) enum Reply {
    Response(RunnerResponse),
    /// No response before the deadline.
    Overrun,
    /// The runner exited or closed its pipes.
    Crashed(String),
    /// The runner answered with something that is not a valid response to
    /// this request.
    Violation(String),
}

/// A live runner with one request in flight at most.
pub(crate) struct RunnerProcess {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl RunnerProcess {
    pub(crate) fn spawn(cmd: &[String]) -> Result<Self> {
        let (program, args) = cmd.split_first().ok_or_else(|| {
            Error::Runner("no runner command configured (set --runner-cmd or EXRANK_RUNNER)".into())
        })?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| Error::Runner(format!("cannot spawn {program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Ok(RunnerProcess {
            child,
            stdin,
            lines: rx,
        })
    }

    pub(crate) fn call(&mut self, req: &RunnerRequest, deadline: Duration) -> Reply {
        if let Err(e) = self
            .stdin
            .write_all(req.to_line().as_bytes())
            .and_then(|_| self.stdin.flush())
        {
            return Reply::Crashed(format!("write failed: {e}"));
        }
        match self.lines.recv_timeout(deadline) {
            Ok(Ok(line)) => match RunnerResponse::parse(&line) {
                Ok(resp) if resp.id == req.id => Reply::Response(resp),
                Ok(resp) => Reply::Violation(format!(
                    "response id {:?} does not match request {:?}",
                    resp.id, req.id
                )),
                Err(e) => Reply::Violation(format!("unparseable response: {e}")),
            },
            Ok(Err(e)) => Reply::Crashed(format!("read failed: {e}")),
            Err(RecvTimeoutError::Timeout) => Reply::Overrun,
            Err(RecvTimeoutError::Disconnected) => {
                let code = self
                    .child
                    .try_wait()
                    .ok()
                    .flatten()
                    .map_or("unknown".to_string(), |s| s.to_string());
                Reply::Crashed(format!("runner exited ({code})"))
            }
        }
    }

    pub(crate) fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for RunnerProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
