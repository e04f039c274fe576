package consts

type Weekday int

const (
	Sunday Weekday = iota
	Monday
)

var names = [...]string{"Sunday", "Monday"}

func (d Weekday) String() string {
	return names[d]
}

type (
	Celsius float64
)

func (c Celsius) Fahrenheit() float64 { return float64(c)*9/5 + 32 }
