"""Grid, population and fit-report files"""
