use std::sync::Arc;

use crate::autodiff::{Array, Tape, Var};
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::model::{MetricKind, Model, Recorded};
use crate::params::Layout;
use crate::scalar::Scalar;

/// Character-level language model with a single gated recurrent cell:
///
/// ```text
/// z  = sigmoid([e_t, h] W_gate + b_gate)
/// c  = tanh([e_t, h] W_cand + b_cand)
/// h' = h + z * (c - h)
/// logits = h' W_out + b_out        (W_out = embedᵀ when tied)
/// ```
///
/// The hidden state starts at zero for every window.
#[derive(Clone, Debug)]
pub struct RnnLmModel {
    vocab: usize,
    embed: usize,
    hidden: usize,
    tied: bool,
    layout: Arc<Layout>,
}

impl RnnLmModel {
    pub fn new(vocab: usize, embed: usize, hidden: usize, tied: bool) -> Result<Self> {
        if vocab == 0 || embed == 0 || hidden == 0 {
            return Err(Error::arg("vocabulary, embedding and hidden sizes must be positive"));
        }
        if tied && embed != hidden {
            return Err(Error::arg("tied output projection needs embed == hidden"));
        }
        let cat = embed + hidden;
        let mut parts = vec![
            ("embed".to_string(), vec![vocab, embed]),
            ("gate.weight".to_string(), vec![cat, hidden]),
            ("gate.bias".to_string(), vec![hidden]),
            ("cand.weight".to_string(), vec![cat, hidden]),
            ("cand.bias".to_string(), vec![hidden]),
        ];
        if !tied {
            parts.push(("out.weight".to_string(), vec![hidden, vocab]));
        }
        parts.push(("out.bias".to_string(), vec![vocab]));
        Ok(RnnLmModel {
            vocab,
            embed,
            hidden,
            tied,
            layout: Arc::new(Layout::new(parts)?),
        })
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn param_count(&self) -> usize {
        self.layout.total()
    }
}

impl<S: Scalar> Model<S> for RnnLmModel {
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn descriptor(&self) -> String {
        format!(
            "rnnlm vocab={} embed={} hidden={} tied={}",
            self.vocab, self.embed, self.hidden, self.tied
        )
    }

    fn metric(&self) -> MetricKind {
        MetricKind::Perplexity
    }

    fn fan_in(&self, segment: &str, shape: &[usize]) -> usize {
        match segment {
            "embed" => self.embed,
            "gate.bias" | "cand.bias" => self.embed + self.hidden,
            "out.bias" => self.hidden,
            _ => shape[0],
        }
    }

    fn record(&self, tape: &mut Tape<S>, params: &[Var], batch: &Batch<S>) -> Result<Recorded> {
        let Batch::Tokens { inputs, targets } = batch else {
            return Err(Error::data("language model expects token windows"));
        };
        let b = inputs.len();
        let steps = inputs.first().map_or(0, |w| w.len());
        if b == 0 || steps == 0 {
            return Err(Error::data("empty token batch"));
        }
        if inputs.iter().chain(targets).any(|w| w.len() != steps) {
            return Err(Error::data("token windows in a batch must share one length"));
        }
        if let Some(&t) = targets.iter().flatten().find(|&&t| t >= self.vocab) {
            return Err(Error::data(format!("target {t} outside vocabulary {}", self.vocab)));
        }
        let (emb, gw, gb, cw, cb) = (params[0], params[1], params[2], params[3], params[4]);
        let (out_w, out_b) = if self.tied {
            (tape.transpose(emb), params[5])
        } else {
            (params[5], params[6])
        };
        let mut h = tape.constant(Array::zeros(&[b, self.hidden]));
        let mut total: Option<Var> = None;
        for t in 0..steps {
            let e = tape.embedding(emb, inputs.iter().map(|w| w[t]).collect());
            let xh = tape.concat(e, h);
            let z = tape.matmul(xh, gw);
            let z = tape.add(z, gb);
            let z = tape.sigmoid(z);
            let c = tape.matmul(xh, cw);
            let c = tape.add(c, cb);
            let c = tape.tanh(c);
            let diff = tape.sub(c, h);
            let step = tape.mul(z, diff);
            h = tape.add(h, step);
            let logits = tape.matmul(h, out_w);
            let logits = tape.add(logits, out_b);
            let ce = tape.softmax_cross_entropy(logits, targets.iter().map(|w| w[t]).collect());
            let m = tape.mean_rows(ce);
            total = Some(match total {
                Some(acc) => tape.add(acc, m),
                None => m,
            });
        }
        let loss = tape.scale(total.expect("steps > 0"), S::one() / S::from_usize_lossy(steps));
        Ok(Recorded { loss, logits: None })
    }
}
