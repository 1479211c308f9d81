//! Portfolios, stocks, and news articles.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// A single portfolio member. In economy mode the "ticker" is a short stable
/// key for the region and `name` is the display form used in prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stock {
    pub ticker: String,
    pub name: String,
    /// Country or sector label, or region in economy mode.
    pub category: String,
    /// Extra surface forms that should resolve to this member.
    #[serde(default)]
    pub aliases: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortfolioMode {
    Stock,
    Economy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Portfolio {
    pub name: String,
    pub mode: PortfolioMode,
    pub members: Vec<Stock>,
}

impl Portfolio {
    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::InvalidPortfolio(format!(
                "portfolio {:?} has no members",
                self.name
            )));
        }
        let mut tickers = BTreeSet::new();
        let mut names = BTreeSet::new();
        for member in &self.members {
            if member.ticker.trim().is_empty() {
                return Err(Error::InvalidPortfolio(format!(
                    "member {:?} has an empty ticker",
                    member.name
                )));
            }
            if !tickers.insert(member.ticker.as_str()) {
                return Err(Error::InvalidPortfolio(format!(
                    "duplicate ticker {:?}",
                    member.ticker
                )));
            }
            if !names.insert(member.name.as_str()) {
                return Err(Error::InvalidPortfolio(format!(
                    "duplicate member name {:?}",
                    member.name
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Portfolio> {
        let portfolio: Portfolio = serde_json::from_str(text)?;
        portfolio.validate()?;
        Ok(portfolio)
    }

    pub fn member_by_ticker(&self, ticker: &str) -> Option<&Stock> {
        self.members.iter().find(|s| s.ticker == ticker)
    }

    /// Display names in portfolio order, for prompt text.
    pub fn member_names(&self) -> Vec<&str> {
        self.members.iter().map(|s| s.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsArticle {
    pub id: String,
    pub date: NaiveDate,
    pub headline: String,
    #[serde(default)]
    pub body: String,
}
