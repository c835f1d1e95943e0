use std::io::{BufRead, Write};

use flow_core::engine::InstanceState;
use flow_core::protocol::{AppSummary, IterationRequest, IterationResponse, NamedValue, Reply};

use crate::render::{parse_input, render_request, Prompt};
use crate::transport::Transport;
use crate::ClientError;

/// One user working through one app: picks a launcher, answers requests
/// until the instance terminates.
pub struct Session<T, I, O> {
    transport: T,
    app_id: String,
    input: I,
    out: O,
    echo: bool,
    pub instance_id: Option<u64>,
    /// Present exactly while a request is unanswered.
    pub pending: Option<IterationRequest>,
    sent: Vec<String>,
}

impl<T: Transport, I: BufRead, O: Write> Session<T, I, O> {
    pub fn new(transport: T, app_id: &str, input: I, out: O) -> Self {
        Session {
            transport,
            app_id: app_id.to_string(),
            input,
            out,
            echo: false,
            instance_id: None,
            pending: None,
            sent: Vec::new(),
        }
    }

    /// Writes each consumed input line to the output, for scripted runs.
    pub fn with_echo(mut self, echo: bool) -> Self {
        self.echo = echo;
        self
    }

    /// Wire text of every response sent so far.
    pub fn sent(&self) -> &[String] {
        &self.sent
    }

    pub fn into_output(self) -> O {
        self.out
    }

    fn read_line(&mut self) -> Result<String, ClientError> {
        let mut line = String::new();
        if self.input.read_line(&mut line)? == 0 {
            return Err(ClientError::InputExhausted);
        }
        let line = line.trim_end_matches(['\r', '\n']).to_string();
        if self.echo {
            writeln!(self.out, "{line}")?;
        }
        Ok(line)
    }

    /// Runs `launcher`, or the one the user picks from the menu, to the end.
    pub fn run(&mut self, launcher: Option<&str>) -> Result<InstanceState, ClientError> {
        let summary = self.transport.app(&self.app_id)?;
        let launcher_id = match launcher {
            Some(id) => id.to_string(),
            None => self.choose(&summary)?,
        };
        let reply = self.transport.launch(&self.app_id, &launcher_id)?;
        self.instance_id = reply.instance_id;
        self.follow(reply)
    }

    fn choose(&mut self, summary: &AppSummary) -> Result<String, ClientError> {
        writeln!(self.out, "{} (version {})", summary.name, summary.version)?;
        for (i, l) in summary.launchers.iter().enumerate() {
            writeln!(self.out, "  {}. {}", i + 1, l.label)?;
        }
        write!(self.out, "> ")?;
        self.out.flush()?;
        let line = self.read_line()?;
        let pick = line.trim();
        summary
            .launchers
            .iter()
            .enumerate()
            .find(|(i, l)| pick == (i + 1).to_string() || pick == l.id || pick == l.label)
            .map(|(_, l)| l.id.clone())
            .ok_or_else(|| ClientError::UnknownLauncher(pick.to_string()))
    }

    fn follow(&mut self, mut reply: Reply) -> Result<InstanceState, ClientError> {
        loop {
            match reply.request {
                None => {
                    writeln!(self.out, "Finished: {}", reply.status.name())?;
                    return Ok(reply.status);
                }
                Some(request) => {
                    self.pending = Some(request);
                    reply = self.collect_and_submit()?;
                }
            }
        }
    }

    fn ask(&mut self, prompt: &Prompt) -> Result<NamedValue, ClientError> {
        loop {
            write!(self.out, "{}\n> ", prompt.text())?;
            self.out.flush()?;
            let line = self.read_line()?;
            match parse_input(prompt, &line) {
                Ok(value) => return Ok(NamedValue::new(&prompt.name, value)),
                Err(e) => writeln!(self.out, "  {e}")?,
            }
        }
    }

    /// Shows the pending request, gathers answers and sends them. A response
    /// the server rejects as invalid is asked again from the first prompt.
    pub fn collect_and_submit(&mut self) -> Result<Reply, ClientError> {
        let request = self
            .pending
            .clone()
            .ok_or_else(|| ClientError::Schema("no pending request".into()))?;
        let rendered = render_request(&request)?;
        for line in &rendered.display_lines {
            writeln!(self.out, "{line}")?;
        }
        loop {
            let response = IterationResponse {
                instance_id: request.instance_id,
                response: rendered.prompts.iter().map(|p| self.ask(p)).collect::<Result<_, _>>()?,
            };
            match self.send(&response) {
                Ok(reply) => {
                    self.pending = None;
                    return Ok(reply);
                }
                Err(ClientError::Rejected {
                    status: 422, detail, ..
                }) => {
                    writeln!(self.out, "  rejected: {detail}")?;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn send(&mut self, response: &IterationResponse) -> Result<Reply, ClientError> {
        loop {
            match self.transport.respond(response) {
                Err(ClientError::Network(message)) => {
                    write!(self.out, "network error: {message}\nEnter to retry, q to quit\n> ")?;
                    self.out.flush()?;
                    if self.read_line()?.trim() == "q" {
                        return Err(ClientError::Network(message));
                    }
                }
                result => {
                    self.sent.push(response.to_wire());
                    return result;
                }
            }
        }
    }
}
