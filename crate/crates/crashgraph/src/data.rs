//! Corpus and market-data ingestion; crash and crisis label generation.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::domain::NewsArticle;
use crate::error::{Error, Result};

/// News corpus grouped by day, days ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub days: BTreeMap<NaiveDate, Vec<NewsArticle>>,
}

impl Corpus {
    pub fn day_list(&self) -> Vec<NaiveDate> {
        self.days.keys().copied().collect()
    }

    pub fn article_count(&self) -> usize {
        self.days.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Deserialize)]
struct CorpusLine {
    #[serde(default)]
    id: Option<String>,
    date: NaiveDate,
    headline: String,
    #[serde(default)]
    body: String,
}

/// Load a line-delimited JSON corpus `{id?, date, headline, body?}`. Missing
/// ids are synthesized as `<date>-<seq>`; duplicate ids are rejected.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("corpus {}: {e}", path.display())))?;
    parse_corpus(&text)
}

pub fn parse_corpus(text: &str) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    let mut seen_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut seq_per_day: BTreeMap<NaiveDate, usize> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CorpusLine = serde_json::from_str(line)
            .map_err(|e| Error::Corpus { line: line_no, reason: e.to_string() })?;
        let id = match parsed.id {
            Some(id) if !id.trim().is_empty() => id,
            _ => {
                let seq = seq_per_day.entry(parsed.date).or_insert(0);
                let id = format!("{}-{}", parsed.date, *seq);
                *seq += 1;
                id
            }
        };
        if let Some(prev) = seen_ids.insert(id.clone(), line_no) {
            return Err(Error::Corpus {
                line: line_no,
                reason: format!("duplicate article id {id:?} (first seen on line {prev})"),
            });
        }
        corpus.days.entry(parsed.date).or_default().push(NewsArticle {
            id,
            date: parsed.date,
            headline: parsed.headline,
            body: parsed.body,
        });
    }
    Ok(corpus)
}

/// Closing prices for one ticker, days strictly increasing, closes positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub ticker: String,
    pub rows: Vec<(NaiveDate, f64)>,
}

impl PriceSeries {
    fn validate(&self) -> Result<()> {
        for window in self.rows.windows(2) {
            if window[1].0 <= window[0].0 {
                return Err(Error::Data(format!(
                    "{}: days must be strictly increasing at {}",
                    self.ticker, window[1].0
                )));
            }
        }
        if let Some((day, close)) = self.rows.iter().find(|(_, c)| *c <= 0.0) {
            return Err(Error::Data(format!(
                "{}: nonpositive close {close} on {day}",
                self.ticker
            )));
        }
        Ok(())
    }
}

/// Load `date,ticker,close` CSV (adjusted closes expected) into per-ticker
/// series.
pub fn load_prices(path: &Path) -> Result<BTreeMap<String, PriceSeries>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("prices {}: {e}", path.display())))?;
    let mut rows_by_ticker: BTreeMap<String, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || (line_no == 1 && line.to_lowercase().starts_with("date,")) {
            continue;
        }
        let mut fields = line.split(',');
        let (date, ticker, close) = match (fields.next(), fields.next(), fields.next()) {
            (Some(d), Some(t), Some(c)) => (d.trim(), t.trim(), c.trim()),
            _ => {
                return Err(Error::Data(format!(
                    "prices line {line_no}: expected date,ticker,close"
                )))
            }
        };
        let date: NaiveDate = date
            .parse()
            .map_err(|e| Error::Data(format!("prices line {line_no}: bad date: {e}")))?;
        let close: f64 = close
            .parse()
            .map_err(|e| Error::Data(format!("prices line {line_no}: bad close: {e}")))?;
        rows_by_ticker.entry(ticker.to_string()).or_default().push((date, close));
    }
    let mut out = BTreeMap::new();
    for (ticker, mut rows) in rows_by_ticker {
        rows.sort_by_key(|(d, _)| *d);
        let series = PriceSeries { ticker: ticker.clone(), rows };
        series.validate()?;
        out.insert(ticker, series);
    }
    Ok(out)
}

/// Daily percentage returns: `close_t / close_{t-1} - 1`, attached to day t.
pub fn daily_returns(prices: &PriceSeries) -> Result<Vec<(NaiveDate, f64)>> {
    prices.validate()?;
    if prices.rows.len() < 2 {
        return Err(Error::Data(format!(
            "{}: need at least two closes for returns",
            prices.ticker
        )));
    }
    Ok(prices
        .rows
        .windows(2)
        .map(|w| (w[1].0, w[1].1 / w[0].1 - 1.0))
        .collect())
}

/// Equal-weight mean return over the tickers that have data each day; days
/// with no data at all are dropped.
pub fn portfolio_returns(
    per_stock: &BTreeMap<String, Vec<(NaiveDate, f64)>>,
) -> Result<Vec<(NaiveDate, f64)>> {
    if per_stock.is_empty() {
        return Err(Error::Data("portfolio returns need at least one ticker".into()));
    }
    let mut by_day: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for series in per_stock.values() {
        for (day, ret) in series {
            by_day.entry(*day).or_default().push(*ret);
        }
    }
    Ok(by_day
        .into_iter()
        .map(|(day, returns)| (day, returns.iter().sum::<f64>() / returns.len() as f64))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Crash,
    Crisis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSeries {
    pub kind: LabelKind,
    pub rows: Vec<(NaiveDate, u8)>,
}

pub const DEFAULT_CRASH_THRESHOLD: f64 = -0.02;
pub const DEFAULT_CRISIS_THRESHOLD: f64 = 0.48;

/// Crash labels: 1 when the portfolio return is at or below the threshold
/// (inclusive).
pub fn crash_labels(returns: &[(NaiveDate, f64)], threshold: f64) -> LabelSeries {
    LabelSeries {
        kind: LabelKind::Crash,
        rows: returns
            .iter()
            .map(|(day, ret)| (*day, u8::from(*ret <= threshold)))
            .collect(),
    }
}

/// Empirical p-th percentile return (nearest-rank), for the alternative
/// percentile-threshold mode.
pub fn percentile_threshold(returns: &[(NaiveDate, f64)], percentile: f64) -> Result<f64> {
    if returns.is_empty() {
        return Err(Error::Data("cannot take a percentile of an empty series".into()));
    }
    if !(0.0..=100.0).contains(&percentile) {
        return Err(Error::Data(format!("percentile {percentile} out of range")));
    }
    let mut sorted: Vec<f64> = returns.iter().map(|(_, r)| *r).collect();
    sorted.sort_by(f64::total_cmp);
    let rank = ((percentile / 100.0) * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.saturating_sub(1)])
}

/// TED spread series in percentage points, days strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TedSeries {
    pub rows: Vec<(NaiveDate, f64)>,
}

impl TedSeries {
    /// The most recent `n` observations at or before `day`, oldest first.
    pub fn trailing(&self, day: NaiveDate, n: usize) -> Vec<f64> {
        let upto = self.rows.partition_point(|(d, _)| *d <= day);
        let start = upto.saturating_sub(n);
        self.rows[start..upto].iter().map(|(_, v)| *v).collect()
    }
}

/// Load `date,spread` CSV.
pub fn load_ted(path: &Path) -> Result<TedSeries> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("ted {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || (line_no == 1 && line.to_lowercase().starts_with("date,")) {
            continue;
        }
        let mut fields = line.split(',');
        let (date, spread) = match (fields.next(), fields.next()) {
            (Some(d), Some(s)) => (d.trim(), s.trim()),
            _ => return Err(Error::Data(format!("ted line {line_no}: expected date,spread"))),
        };
        let date: NaiveDate =
            date.parse().map_err(|e| Error::Data(format!("ted line {line_no}: bad date: {e}")))?;
        let spread: f64 = spread
            .parse()
            .map_err(|e| Error::Data(format!("ted line {line_no}: bad spread: {e}")))?;
        rows.push((date, spread));
    }
    rows.sort_by_key(|(d, _)| *d);
    for w in rows.windows(2) {
        if w[1].0 == w[0].0 {
            return Err(Error::Data(format!("ted: duplicate day {}", w[1].0)));
        }
    }
    Ok(TedSeries { rows })
}

/// Crisis labels: 1 when the TED spread is strictly above the threshold.
pub fn crisis_labels(ted: &TedSeries, threshold: f64) -> LabelSeries {
    LabelSeries {
        kind: LabelKind::Crisis,
        rows: ted
            .rows
            .iter()
            .map(|(day, spread)| (*day, u8::from(*spread > threshold)))
            .collect(),
    }
}

/// Pair each prediction day with the label of the next available labeled day.
/// Prediction days with no following label are dropped and reported back.
pub fn align_next_day(
    labels: &LabelSeries,
    prediction_days: &[NaiveDate],
) -> (Vec<(NaiveDate, u8)>, Vec<NaiveDate>) {
    let mut pairs = Vec::new();
    let mut dropped = Vec::new();
    for day in prediction_days {
        let next = labels.rows.partition_point(|(d, _)| d <= day);
        match labels.rows.get(next) {
            Some((_, label)) => pairs.push((*day, *label)),
            None => {
                log::warn!("no label after prediction day {day}; dropping it from scoring");
                dropped.push(*day);
            }
        }
    }
    (pairs, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(n: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2007, 6, n).unwrap()
    }

    #[test]
    fn corpus_groups_lines_by_day() {
        let text = concat!(
            r#"{"id":"a","date":"2007-06-04","headline":"h1"}"#, "\n",
            r#"{"id":"b","date":"2007-06-04","headline":"h2","body":"text"}"#, "\n",
            r#"{"id":"c","date":"2007-06-05","headline":"h3"}"#, "\n",
        );
        let corpus = parse_corpus(text).unwrap();
        assert_eq!(corpus.days.len(), 2);
        assert_eq!(corpus.days[&day(4)].len(), 2);
        assert_eq!(corpus.article_count(), 3);
    }

    #[test]
    fn corpus_synthesizes_missing_ids() {
        let text = concat!(
            r#"{"date":"2007-06-04","headline":"h1"}"#, "\n",
            r#"{"date":"2007-06-04","headline":"h2"}"#, "\n",
        );
        let corpus = parse_corpus(text).unwrap();
        let ids: Vec<&str> = corpus.days[&day(4)].iter().map(|a| a.id.as_str()).collect();
        assert_eq!(ids, vec!["2007-06-04-0", "2007-06-04-1"]);
    }

    #[test]
    fn corpus_errors_name_the_offending_line() {
        let text = concat!(
            r#"{"id":"a","date":"2007-06-04","headline":"h1"}"#, "\n",
            r#"{"id":"b","headline":"missing date"}"#, "\n",
        );
        match parse_corpus(text) {
            Err(Error::Corpus { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected corpus error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_article_ids_are_rejected() {
        let text = concat!(
            r#"{"id":"a","date":"2007-06-04","headline":"h1"}"#, "\n",
            r#"{"id":"a","date":"2007-06-05","headline":"h2"}"#, "\n",
        );
        assert!(matches!(parse_corpus(text), Err(Error::Corpus { line: 2, .. })));
    }

    #[test]
    fn returns_match_hand_arithmetic() {
        let series = PriceSeries {
            ticker: "T".into(),
            rows: vec![(day(4), 100.0), (day(5), 102.0)],
        };
        let returns = daily_returns(&series).unwrap();
        assert_eq!(returns.len(), 1);
        assert_eq!(returns[0].0, day(5));
        assert!((returns[0].1 - 0.02).abs() < 1e-12);

        let flat = PriceSeries {
            ticker: "T".into(),
            rows: vec![(day(4), 100.0), (day(5), 100.0)],
        };
        assert_eq!(daily_returns(&flat).unwrap()[0].1, 0.0);
    }

    #[test]
    fn three_closes_give_two_returns_cross_checked_by_hand() {
        // 98/100 - 1 = -0.02 exactly; 99.96/98 - 1 = +0.02 exactly.
        let series = PriceSeries {
            ticker: "T".into(),
            rows: vec![(day(4), 100.0), (day(5), 98.0), (day(6), 99.96)],
        };
        let returns = daily_returns(&series).unwrap();
        assert_eq!(returns.len(), 2);
        assert!((returns[0].1 - (-0.02)).abs() < 1e-12);
        assert!((returns[1].1 - 0.02).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_close_is_an_error() {
        let series = PriceSeries {
            ticker: "T".into(),
            rows: vec![(day(4), 100.0), (day(5), 0.0)],
        };
        assert!(daily_returns(&series).is_err());
    }

    #[test]
    fn portfolio_returns_average_across_tickers() {
        let mut per_stock = BTreeMap::new();
        per_stock.insert("A".to_string(), vec![(day(4), -0.03)]);
        per_stock.insert("B".to_string(), vec![(day(4), -0.02)]);
        let out = portfolio_returns(&per_stock).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out[0].1 - (-0.025)).abs() < 1e-12);
    }

    #[test]
    fn missing_ticker_days_average_over_the_rest() {
        let mut per_stock = BTreeMap::new();
        per_stock.insert("A".to_string(), vec![(day(4), 0.01), (day(5), 0.03)]);
        per_stock.insert("B".to_string(), vec![(day(4), 0.03)]);
        let out = portfolio_returns(&per_stock).unwrap();
        assert_eq!(out, vec![(day(4), 0.02), (day(5), 0.03)]);
    }

    #[test]
    fn identical_series_average_to_themselves() {
        let series = vec![(day(4), 0.01), (day(5), -0.04)];
        let mut per_stock = BTreeMap::new();
        per_stock.insert("A".to_string(), series.clone());
        per_stock.insert("B".to_string(), series.clone());
        assert_eq!(portfolio_returns(&per_stock).unwrap(), series);
    }

    #[test]
    fn empty_portfolio_map_is_an_error() {
        assert!(portfolio_returns(&BTreeMap::new()).is_err());
    }

    #[test]
    fn crash_threshold_is_inclusive() {
        let returns = vec![(day(4), -0.025), (day(5), -0.020), (day(6), -0.019)];
        let labels = crash_labels(&returns, DEFAULT_CRASH_THRESHOLD);
        assert_eq!(labels.rows[0].1, 1);
        assert_eq!(labels.rows[1].1, 1, "-2.0% exactly is a crash");
        assert_eq!(labels.rows[2].1, 0);
    }

    #[test]
    fn crisis_threshold_is_strict() {
        let ted = TedSeries { rows: vec![(day(4), 0.50), (day(5), 0.48), (day(6), 0.10)] };
        let labels = crisis_labels(&ted, DEFAULT_CRISIS_THRESHOLD);
        assert_eq!(labels.rows[0].1, 1);
        assert_eq!(labels.rows[1].1, 0, "0.48 exactly is not above 0.48");
        assert_eq!(labels.rows[2].1, 0);
    }

    #[test]
    fn labels_are_idempotent_and_pure() {
        let returns = vec![(day(4), -0.03), (day(5), 0.01)];
        let a = crash_labels(&returns, -0.02);
        let b = crash_labels(&returns, -0.02);
        assert_eq!(a, b);
    }

    #[test]
    fn percentile_threshold_marks_about_the_right_fraction() {
        // Synthetic pseudo-normal returns via a deterministic irrational
        // rotation; the 5th-percentile threshold must mark ~5% of days.
        let returns: Vec<(NaiveDate, f64)> = (0..400)
            .map(|i| {
                let x = ((i as f64 * 0.61803398875).fract() - 0.5) * 0.1;
                (day(1) + chrono::Days::new(i), x)
            })
            .collect();
        let threshold = percentile_threshold(&returns, 5.0).unwrap();
        let labels = crash_labels(&returns, threshold);
        let positives: usize = labels.rows.iter().map(|(_, l)| *l as usize).sum();
        let fraction = positives as f64 / labels.rows.len() as f64;
        assert!((fraction - 0.05).abs() <= 0.01, "marked {fraction}");
    }

    #[test]
    fn alignment_skips_to_the_next_labeled_day() {
        // Friday's prediction pairs with Monday's label.
        let labels = LabelSeries {
            kind: LabelKind::Crash,
            rows: vec![(day(8), 0), (day(11), 1), (day(12), 0)],
        };
        let (pairs, dropped) = align_next_day(&labels, &[day(8), day(11)]);
        assert_eq!(pairs, vec![(day(8), 1), (day(11), 0)]);
        assert!(dropped.is_empty());
    }

    #[test]
    fn trailing_day_without_label_is_dropped_with_warning() {
        let labels = LabelSeries { kind: LabelKind::Crash, rows: vec![(day(5), 0)] };
        let (pairs, dropped) = align_next_day(&labels, &[day(4), day(5)]);
        assert_eq!(pairs, vec![(day(4), 0)]);
        assert_eq!(dropped, vec![day(5)]);
    }

    #[test]
    fn contiguous_weekdays_shift_by_one() {
        let labels = LabelSeries {
            kind: LabelKind::Crash,
            rows: vec![(day(4), 1), (day(5), 0), (day(6), 1)],
        };
        let (pairs, _) = align_next_day(&labels, &[day(4), day(5)]);
        assert_eq!(pairs, vec![(day(4), 0), (day(5), 1)]);
    }

    #[test]
    fn ted_trailing_window_is_bounded_and_ordered() {
        let ted = TedSeries {
            rows: (1..=9).map(|n| (day(n), n as f64 / 10.0)).collect(),
        };
        assert_eq!(ted.trailing(day(5), 5), vec![0.1, 0.2, 0.3, 0.4, 0.5]);
        assert_eq!(ted.trailing(day(2), 5), vec![0.1, 0.2]);
        assert_eq!(ted.trailing(day(9), 3), vec![0.7, 0.8, 0.9]);
    }
}
