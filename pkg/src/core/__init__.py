# Core Module for SecretSieve: errors and logging setup
