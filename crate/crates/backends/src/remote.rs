//! Client for an out-of-process token classifier.

use opnote_core::{decode_spans, repair_labels, EntitySpan, Label, LabelSequence, Transcript};
use reqwest::Client;
use serde::{Deserialize, Serialize};
use url::Url;

use crate::config::{TaggerBackend, TaggerConfig};
use crate::error::{BackendError, Result};
use crate::http::{new_request_id, post_json};

#[derive(Debug, Serialize)]
struct TagRequest<'a> {
    text: &'a str,
}

#[derive(Debug, Deserialize)]
struct TagResponse {
    tokens: Vec<(usize, usize)>,
    labels: Vec<String>,
    #[serde(default)]
    scores: Vec<f64>,
}

/// Labels as returned by the server, already repaired.
#[derive(Debug, Clone, PartialEq)]
pub struct RemoteLabels {
    pub sequence: LabelSequence,
    pub scores: Vec<f64>,
    pub request_id: String,
}

#[derive(Debug, Clone)]
pub struct RemoteTagger {
    client: Client,
    endpoint: Url,
    config: TaggerConfig,
}

impl RemoteTagger {
    pub fn new(config: TaggerConfig) -> Result<Self> {
        config.validate()?;
        if config.backend != TaggerBackend::Remote {
            return Err(BackendError::Config("tagger backend is not remote".into()));
        }
        let base = config.endpoint_url.clone().expect("validated");
        let endpoint = join(&base, "tag")?;
        let client = Client::builder().build().map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self { client, endpoint, config })
    }

    pub fn endpoint(&self) -> &Url {
        &self.endpoint
    }

    pub async fn tag_labels(&self, transcript: &Transcript) -> Result<RemoteLabels> {
        transcript.validate()?;
        let request_id = new_request_id();
        let value = post_json(
            &self.client,
            &self.endpoint,
            &TagRequest { text: &transcript.text },
            &request_id,
            None,
            self.config.retry(),
        )
        .await?;
        let resp: TagResponse =
            serde_json::from_value(value).map_err(|e| BackendError::Protocol(format!("bad tag response: {e}")))?;
        let sequence = to_sequence(resp.tokens, &resp.labels, transcript.char_len())?;
        if !resp.scores.is_empty() && resp.scores.len() != sequence.len() {
            return Err(BackendError::Protocol(format!("{} scores for {} tokens", resp.scores.len(), sequence.len())));
        }
        Ok(RemoteLabels { sequence: repair_labels(&sequence), scores: resp.scores, request_id })
    }

    pub async fn tag(&self, transcript: &Transcript) -> Result<Vec<EntitySpan>> {
        let labels = self.tag_labels(transcript).await?;
        Ok(decode_spans(&labels.sequence, &transcript.text)?)
    }
}

fn to_sequence(tokens: Vec<(usize, usize)>, labels: &[String], n_chars: usize) -> Result<LabelSequence> {
    let labels = labels
        .iter()
        .map(|l| l.parse::<Label>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| BackendError::Protocol(e.to_string()))?;
    let seq = LabelSequence::new(tokens, labels).map_err(|e| BackendError::Protocol(e.to_string()))?;
    seq.validate(n_chars).map_err(|e| BackendError::Protocol(e.to_string()))?;
    Ok(seq)
}

/// Appends a path segment, keeping any base path.
fn join(base: &Url, segment: &str) -> Result<Url> {
    let mut url = base.clone();
    url.path_segments_mut()
        .map_err(|_| BackendError::Config(format!("{base} cannot be a base URL")))?
        .pop_if_empty()
        .push(segment);
    Ok(url)
}
